#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.h"
#include "tgn/gradcheck.h"
#include "tgn/nn.h"
#include "tgn/optim.h"

namespace tgn {
namespace {

using testing::random_tensor;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// W x + b for row `row` of a stacked weight.
double affine(const Tensor& w, const Tensor& b, std::int64_t row,
              std::span<const Scalar> x) {
  double acc = b(0, row);
  for (std::int64_t c = 0; c < w.cols(); ++c) acc += w(row, c) * x[static_cast<std::size_t>(c)];
  return acc;
}

TEST(LinearTest, MatchesDirectFormula) {
  Rng rng(1);
  Linear layer(3, 2, rng);
  for (Scalar& b : layer.bias.mutable_values()) b = 0.25;
  const Tensor x = random_tensor({4, 3}, rng, false);
  const Tensor y = layer(x);
  ASSERT_EQ(y.shape(), (Shape{4, 2}));
  for (std::int64_t r = 0; r < 4; ++r) {
    for (std::int64_t o = 0; o < 2; ++o) {
      EXPECT_NEAR(y(r, o), affine(layer.weight, layer.bias, o, x.row_values(r)), 1e-12);
    }
  }
}

TEST(LinearTest, GlorotLimit) {
  EXPECT_DOUBLE_EQ(glorot_limit(4, 2), std::sqrt(1.0));
  Rng rng(2);
  Linear layer(10, 6, rng);
  const double limit = glorot_limit(10, 6);
  for (Scalar w : layer.weight.values()) EXPECT_LE(std::abs(w), limit);
}

TEST(MergeLayerTest, MatchesHandComputation) {
  Rng rng(3);
  MergeLayer merge(2, 1, 2, 1, rng);
  merge.fc1.weight = Tensor::from_values({2, 3}, {1, -1, 0.5, -2, 0, 1}, true);
  merge.fc1.bias = Tensor::row({0.1, -0.1}, true);
  merge.fc2.weight = Tensor::from_values({1, 2}, {2, 3}, true);
  merge.fc2.bias = Tensor::row({0.5}, true);
  const Tensor out = merge(Tensor::row({1, 2}), Tensor::row({4}));
  // hidden = relu([1 - 2 + 2 + 0.1, -2 + 4 - 0.1]) = [1.1, 1.9]
  EXPECT_NEAR(out.item(), 2 * 1.1 + 3 * 1.9 + 0.5, 1e-12);
}

TEST(GruTest, MatchesScalarFormula) {
  Rng rng(4);
  const std::int64_t m = 5;
  const std::int64_t d = 3;
  GruParams p = GruParams::init(m, d, rng);
  const Tensor msg = random_tensor({2, m}, rng, false);
  const Tensor state = random_tensor({2, d}, rng, false, 0.9);
  const Tensor out = gru_cell(msg, state, p);
  for (std::int64_t r = 0; r < 2; ++r) {
    const auto x = msg.row_values(r);
    const auto h = state.row_values(r);
    for (std::int64_t i = 0; i < d; ++i) {
      const double rg = sig(affine(p.input_weight, p.input_bias, i, x) +
                            affine(p.hidden_weight, p.hidden_bias, i, h));
      const double zg = sig(affine(p.input_weight, p.input_bias, d + i, x) +
                            affine(p.hidden_weight, p.hidden_bias, d + i, h));
      const double c = std::tanh(affine(p.input_weight, p.input_bias, 2 * d + i, x) +
                                 rg * affine(p.hidden_weight, p.hidden_bias, 2 * d + i, h));
      const double want = (1 - zg) * h[static_cast<std::size_t>(i)] + zg * c;
      EXPECT_NEAR(out(r, i), want, 1e-12);
    }
  }
}

TEST(GruTest, ClosedUpdateGateKeepsState) {
  Rng rng(5);
  GruParams p = GruParams::init(4, 3, rng);
  // Push the update gate to zero regardless of input.
  auto bias = p.input_bias.mutable_values();
  for (std::int64_t i = 3; i < 6; ++i) bias[static_cast<std::size_t>(i)] = -1000;
  const Tensor state = random_tensor({3, 3}, rng, false);
  const Tensor out = gru_cell(random_tensor({3, 4}, rng, false, 5.0), state, p);
  EXPECT_LT(testing::max_abs_diff(out.values(), state.values()), 1e-12);
}

TEST(GruTest, OutputStaysInsideUnitBox) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    GruParams p = GruParams::init(6, 4, rng);
    const Tensor state = random_tensor({8, 4}, rng, false, 0.999);
    const Tensor out = gru_cell(random_tensor({8, 6}, rng, false, 20.0), state, p);
    for (Scalar v : out.values()) {
      EXPECT_LT(std::abs(v), 1.0);
    }
  }
}

TEST(GruTest, RejectsMismatchedShapes) {
  Rng rng(7);
  GruParams p = GruParams::init(4, 3, rng);
  EXPECT_THROW(gru_cell(Tensor::zeros({1, 5}), Tensor::zeros({1, 3}), p),
               std::invalid_argument);
  EXPECT_THROW(gru_cell(Tensor::zeros({1, 4}), Tensor::zeros({2, 3}), p),
               std::invalid_argument);
}

TEST(GruTest, GradientsMatchFiniteDifferences) {
  Rng rng(8);
  GruParams p = GruParams::init(4, 3, rng);
  const Tensor msg = random_tensor({2, 4}, rng);
  const Tensor state = random_tensor({2, 3}, rng);
  const auto result = check_gradients(
      [&] { return sum(gru_cell(msg, state, p)); },
      {msg, state, p.input_weight, p.hidden_weight, p.input_bias, p.hidden_bias});
  EXPECT_LT(result.max_relative_error(), 1e-6);
}

TEST(RnnTest, MatchesScalarFormula) {
  Rng rng(9);
  RnnParams p = RnnParams::init(3, 2, rng);
  const Tensor msg = random_tensor({1, 3}, rng, false);
  const Tensor state = random_tensor({1, 2}, rng, false);
  const Tensor out = rnn_cell(msg, state, p);
  for (std::int64_t i = 0; i < 2; ++i) {
    const double want = std::tanh(affine(p.input_weight, p.input_bias, i, msg.row_values(0)) +
                                  affine(p.hidden_weight, p.hidden_bias, i, state.row_values(0)));
    EXPECT_NEAR(out(0, i), want, 1e-12);
  }
}

TEST(AttentionTest, SingleKeyReturnsProjectedValue) {
  Rng rng(10);
  MultiHeadAttention mha(4, 3, 2, rng);
  const Tensor q = random_tensor({1, 4}, rng, false);
  const Tensor kv = random_tensor({1, 3}, rng, false);
  const std::uint8_t valid[] = {1};
  const AttentionOutput out = mha(q, kv, kv, valid, 0.0, rng, false);
  // Softmax over one key is 1, so the output is W_o (W_v v + b_v) + b_o.
  const Tensor want = mha.output(mha.value(kv));
  EXPECT_LT(testing::max_abs_diff(out.output.values(), want.values()), 1e-12);
  for (Scalar w : out.weights.values()) EXPECT_NEAR(w, 1.0, 1e-15);
}

TEST(AttentionTest, WeightsSumToOneAndMaskedQueriesGiveZero) {
  Rng rng(11);
  const std::int64_t k = 4;
  MultiHeadAttention mha(6, 5, 3, rng);
  const Tensor q = random_tensor({3, 6}, rng, false);
  const Tensor kv = random_tensor({3 * k, 5}, rng, false);
  const std::vector<std::uint8_t> valid = {1, 1, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0};
  const AttentionOutput out = mha(q, kv, kv, valid, 0.0, rng, false);
  ASSERT_EQ(out.weights.shape(), (Shape{3 * 3, k}));
  for (std::int64_t row = 0; row < out.weights.rows(); ++row) {
    const std::int64_t query = row / 3;
    double total = 0.0;
    for (std::int64_t j = 0; j < k; ++j) {
      const double w = out.weights(row, j);
      if (!valid[static_cast<std::size_t>(query * k + j)]) EXPECT_EQ(w, 0.0);
      total += w;
    }
    EXPECT_NEAR(total, query == 1 ? 0.0 : 1.0, 1e-12);
  }
  for (std::int64_t c = 0; c < 6; ++c) EXPECT_EQ(out.output(1, c), 0.0);
}

TEST(AttentionTest, GradientsMatchFiniteDifferences) {
  Rng rng(12);
  MultiHeadAttention mha(4, 3, 2, rng);
  const Tensor q = random_tensor({2, 4}, rng);
  const Tensor kv = random_tensor({6, 3}, rng);
  const std::vector<std::uint8_t> valid = {1, 1, 0, 1, 1, 1};
  ParameterList params;
  mha.collect(params, "mha");
  std::vector<Tensor> inputs = {q, kv};
  for (const Parameter& p : params) inputs.push_back(p.tensor);
  const auto result = check_gradients(
      [&] { return sum(mha(q, kv, kv, valid, 0.0, rng, false).output); }, inputs);
  EXPECT_LT(result.max_relative_error(), 1e-6);
}

TEST(AdamTest, FirstTwoStepsMatchFormula) {
  Tensor p = Tensor::row({1.0, -2.0}, true);
  ParameterList params = {{"p", p}};
  Adam adam(params, 0.1);
  const double g1[] = {0.5, -3.0};
  const double g2[] = {-1.0, 2.0};
  double m[2] = {0, 0};
  double v[2] = {0, 0};
  double want[2] = {1.0, -2.0};
  for (int step = 1; step <= 2; ++step) {
    const double* g = step == 1 ? g1 : g2;
    adam.zero_grad();
    for (int i = 0; i < 2; ++i) p.mutable_grad()[static_cast<std::size_t>(i)] = g[i];
    adam.step();
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mhat = m[i] / (1 - std::pow(0.9, step));
      const double vhat = v[i] / (1 - std::pow(0.999, step));
      want[i] -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
      EXPECT_NEAR(p(0, i), want[i], 1e-12);
    }
  }
  EXPECT_EQ(adam.state().step, 2);
}

TEST(AdamTest, RejectsMismatchedState) {
  std::vector<Tensor> params = {Tensor::row({1.0, 2.0}, true)};
  AdamState state = AdamState::for_parameters(params, 0.1);
  std::vector<Tensor> other = {Tensor::row({1.0, 2.0, 3.0}, true)};
  EXPECT_THROW(adam_step(other, state), std::invalid_argument);
}

}  // namespace
}  // namespace tgn
