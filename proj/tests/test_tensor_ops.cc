#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "test_util.h"
#include "tgn/gradcheck.h"
#include "tgn/ops.h"
#include "tgn/tensor.h"

namespace tgn {
namespace {

using testing::random_tensor;

constexpr double kTol = 1e-4;

void expect_grad_ok(const std::function<Tensor()>& f, std::vector<Tensor> inputs) {
  const GradCheckResult r = check_gradients(f, std::move(inputs));
  for (const auto& e : r.entries) {
    EXPECT_LT(e.relative_error, kTol) << e.name << " analytic " << e.analytic_norm
                                      << " numeric " << e.numeric_norm;
  }
}

// Weighted sum so that every output element contributes a distinct gradient.
Tensor probe(const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  const Tensor w = random_tensor(y.shape(), rng, false);
  return sum(mul(y, w));
}

TEST(TensorTest, ConstructorsAndShapes) {
  const Tensor z = Tensor::zeros({2, 3});
  EXPECT_EQ(z.rows(), 2);
  EXPECT_EQ(z.cols(), 3);
  EXPECT_FALSE(z.requires_grad());
  EXPECT_THROW(Tensor::from_values({2, 2}, {1, 2, 3}), std::invalid_argument);
  EXPECT_EQ(Tensor::scalar(4.5).item(), 4.5);
  EXPECT_THROW(Tensor::zeros({1, 2}).item(), std::invalid_argument);
}

TEST(TensorTest, DetachCopiesValuesWithoutGrad) {
  Tensor a = Tensor::row({1, 2}, true);
  Tensor b = a.detach();
  a.mutable_values()[0] = 7;
  EXPECT_EQ(b.values()[0], 1);
  EXPECT_FALSE(b.requires_grad());
}

TEST(TapeTest, RecordsOnlyWhenActiveAndTracked) {
  const Tensor a = Tensor::row({1, 2}, true);
  const Tensor c = Tensor::row({3, 4});
  EXPECT_FALSE(add(a, c).requires_grad());
  Tape tape;
  TapeScope scope(tape);
  EXPECT_FALSE(add(c, c).requires_grad());
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_TRUE(add(a, c).requires_grad());
  EXPECT_EQ(tape.size(), 1u);
  {
    NoGradGuard guard;
    EXPECT_FALSE(add(a, c).requires_grad());
  }
  EXPECT_EQ(tape.size(), 1u);
}

TEST(TapeTest, BackwardRejectsNonScalarAndUntracked) {
  Tape tape;
  TapeScope scope(tape);
  const Tensor a = Tensor::row({1, 2}, true);
  EXPECT_THROW(tape.backward(scale(a, 2)), std::invalid_argument);
  EXPECT_THROW(tape.backward(Tensor::scalar(1)), std::invalid_argument);
}

TEST(TapeTest, LeafGradientsAccumulateAcrossBackwardCalls) {
  Tensor a = Tensor::row({1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  const Tensor loss = sum(scale(a, 3));
  tape.backward(loss);
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(a.grad()[0], 6.0);
  EXPECT_DOUBLE_EQ(a.grad()[1], 6.0);
}

TEST(TapeTest, SharedSubexpressionGradient) {
  // f = sum(x * x) + sum(x) -> df/dx = 2x + 1
  Tensor x = Tensor::row({1.5, -2.0}, true);
  Tape tape;
  TapeScope scope(tape);
  tape.backward(add(sum(mul(x, x)), sum(x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -3.0);
}

TEST(OpsTest, ShapeErrorsNameKernelAndShapes) {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({3, 2});
  try {
    add(a, b);
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("add"), std::string::npos);
    EXPECT_NE(what.find("[2x3]"), std::string::npos);
    EXPECT_NE(what.find("[3x2]"), std::string::npos);
  }
  EXPECT_THROW(matmul(a, a), std::invalid_argument);
  EXPECT_THROW(add_row(a, Tensor::zeros({1, 2})), std::invalid_argument);
  EXPECT_THROW(slice_cols(a, 2, 4), std::invalid_argument);
  const std::int64_t bad[] = {3};
  EXPECT_THROW(gather_rows(a, bad), std::invalid_argument);
}

TEST(OpsTest, ForwardValues) {
  const Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from_values({2, 2}, {5, 6, 7, 8});
  const Tensor m = matmul(a, b);
  EXPECT_EQ(std::vector<Scalar>(m.values().begin(), m.values().end()),
            (std::vector<Scalar>{19, 22, 43, 50}));
  const Tensor l = linear(a, b, Tensor::row({1, -1}));
  // x W^T + b
  EXPECT_EQ(std::vector<Scalar>(l.values().begin(), l.values().end()),
            (std::vector<Scalar>{18, 22, 40, 52}));
  EXPECT_DOUBLE_EQ(mean(a).item(), 2.5);
  const Tensor r = relu(Tensor::row({-1, 0, 2}));
  EXPECT_EQ(r.values()[0], 0);
  EXPECT_EQ(r.values()[2], 2);
  const std::int64_t idx[] = {1, 1, 0};
  const Tensor g = gather_rows(a, idx);
  EXPECT_EQ(g(1, 0), 3);
  EXPECT_EQ(g(2, 1), 2);
}

TEST(OpsTest, SoftmaxMaskAndFullyMaskedRow) {
  const Tensor x = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  const std::vector<std::uint8_t> mask = {1, 0, 1, 0, 0, 0};
  const Tensor y = softmax_rows(x, mask);
  EXPECT_EQ(y(0, 1), 0);
  EXPECT_NEAR(y(0, 0) + y(0, 2), 1.0, 1e-15);
  EXPECT_NEAR(y(0, 2) / y(0, 0), std::exp(2.0), 1e-12);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(y(1, c), 0);
}

TEST(OpsTest, SigmoidIsStableForLargeInputs) {
  const Tensor y = sigmoid(Tensor::row({-1000, 1000, 0}));
  EXPECT_EQ(y.values()[0], 0);
  EXPECT_EQ(y.values()[1], 1);
  EXPECT_EQ(y.values()[2], 0.5);
}

TEST(OpsTest, BceMatchesDirectFormula) {
  const Tensor logits = Tensor::from_values({3, 1}, {0.3, -2.0, 50.0});
  const Tensor labels = Tensor::from_values({3, 1}, {1, 0, 0});
  const double direct = (-std::log(1 / (1 + std::exp(-0.3))) -
                         std::log(1 - 1 / (1 + std::exp(2.0))) + 50.0) /
                        3.0;
  EXPECT_NEAR(bce_with_logits(logits, labels).item(), direct, 1e-12);
  EXPECT_THROW(bce_with_logits(logits, Tensor::from_values({3, 1}, {1, 0.5, 0})),
               std::invalid_argument);
}

TEST(OpsTest, SegmentReductions) {
  const Tensor x = Tensor::from_values({3, 2}, {1, 2, 3, 4, 5, 6});
  const std::int64_t offsets[] = {0, 2, 2, 3};
  const Tensor s = segment_sum(x, offsets);
  EXPECT_EQ(s.rows(), 3);
  EXPECT_EQ(s(0, 0), 4);
  EXPECT_EQ(s(1, 1), 0);
  EXPECT_EQ(s(2, 1), 6);
  EXPECT_THROW(segment_mean(x, offsets), std::invalid_argument);
  const std::int64_t ok[] = {0, 2, 3};
  EXPECT_EQ(segment_mean(x, ok)(0, 1), 3);
}

TEST(OpsTest, DropoutIdentityInEvalAndScaledInTraining) {
  Rng rng(3);
  const Tensor x = Tensor::filled({10, 10}, 1.0);
  const Tensor eval = dropout(x, 0.5, rng, false);
  EXPECT_EQ(eval.values()[17], 1);
  const Tensor train = dropout(x, 0.5, rng, true);
  for (Scalar v : train.values()) EXPECT_TRUE(v == 0 || v == 2);
  EXPECT_THROW(dropout(x, 1.0, rng, true), std::invalid_argument);
}

TEST(OpsTest, GroupedAttentionLayout) {
  // One query, two keys, two heads of width 1.
  const Tensor q = Tensor::row({1, 2});
  const Tensor k = Tensor::from_values({2, 2}, {3, 4, 5, 6});
  const Tensor s = grouped_scores(q, k, 2);
  ASSERT_EQ(s.shape(), (Shape{2, 2}));
  EXPECT_EQ(s(0, 0), 3);
  EXPECT_EQ(s(0, 1), 5);
  EXPECT_EQ(s(1, 0), 8);
  EXPECT_EQ(s(1, 1), 12);
  const Tensor w = Tensor::from_values({2, 2}, {0.25, 0.75, 1, 0});
  const Tensor mixed = grouped_mix(w, k, 2);
  EXPECT_DOUBLE_EQ(mixed(0, 0), 0.25 * 3 + 0.75 * 5);
  EXPECT_DOUBLE_EQ(mixed(0, 1), 4);
}

class KernelGradientTest : public ::testing::Test {
 protected:
  Rng rng{1234};
};

TEST_F(KernelGradientTest, Elementwise) {
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  expect_grad_ok([&] { return probe(add(a, b)); }, {a, b});
  expect_grad_ok([&] { return probe(sub(a, b)); }, {a, b});
  expect_grad_ok([&] { return probe(mul(a, b)); }, {a, b});
  expect_grad_ok([&] { return probe(scale(a, -1.7)); }, {a});
  expect_grad_ok([&] { return probe(add_scalar(a, 0.3)); }, {a});
}

TEST_F(KernelGradientTest, AddRowMatmulLinear) {
  Tensor x = random_tensor({4, 3}, rng);
  Tensor r = random_tensor({1, 3}, rng);
  Tensor w = random_tensor({5, 3}, rng);
  Tensor b = random_tensor({1, 5}, rng);
  Tensor m = random_tensor({3, 2}, rng);
  expect_grad_ok([&] { return probe(add_row(x, r)); }, {x, r});
  expect_grad_ok([&] { return probe(matmul(x, m)); }, {x, m});
  expect_grad_ok([&] { return probe(linear(x, w, b)); }, {x, w, b});
  expect_grad_ok([&] { return probe(linear(x, w, Tensor())); }, {x, w});
}

TEST_F(KernelGradientTest, ConcatSliceGather) {
  Tensor a = random_tensor({3, 2}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor c = random_tensor({2, 2}, rng);
  expect_grad_ok([&] {
    const Tensor parts[] = {a, b};
    return probe(concat_cols(parts));
  }, {a, b});
  expect_grad_ok([&] {
    const Tensor parts[] = {a, c};
    return probe(concat_rows(parts));
  }, {a, c});
  expect_grad_ok([&] { return probe(slice_cols(b, 1, 3)); }, {b});
  expect_grad_ok([&] { return probe(slice_rows(b, 1, 3)); }, {b});
  const std::int64_t idx[] = {2, 0, 2, 1, 2};
  expect_grad_ok([&] { return probe(gather_rows(a, idx)); }, {a});
}

TEST_F(KernelGradientTest, Reductions) {
  Tensor x = random_tensor({5, 3}, rng);
  const std::int64_t offsets[] = {0, 2, 2, 5};
  const std::int64_t nonempty[] = {0, 1, 5};
  expect_grad_ok([&] { return scale(sum(x), 0.7); }, {x});
  expect_grad_ok([&] { return mean(mul(x, x)); }, {x});
  expect_grad_ok([&] { return probe(segment_sum(x, offsets)); }, {x});
  expect_grad_ok([&] { return probe(segment_mean(x, nonempty)); }, {x});
}

TEST_F(KernelGradientTest, Nonlinearities) {
  Tensor x = random_tensor({4, 3}, rng, true, 2.0);
  expect_grad_ok([&] { return probe(sigmoid(x)); }, {x});
  expect_grad_ok([&] { return probe(tanh(x)); }, {x});
  expect_grad_ok([&] { return probe(relu(x)); }, {x});
  expect_grad_ok([&] { return probe(cos(x)); }, {x});
}

TEST_F(KernelGradientTest, SoftmaxWithMask) {
  Tensor x = random_tensor({3, 4}, rng);
  const std::vector<std::uint8_t> mask = {1, 1, 0, 1, 0, 0, 0, 0, 1, 0, 1, 1};
  expect_grad_ok([&] { return probe(softmax_rows(x)); }, {x});
  expect_grad_ok([&] { return probe(softmax_rows(x, mask)); }, {x});
}

TEST_F(KernelGradientTest, DropoutWithFixedMask) {
  Tensor x = random_tensor({4, 4}, rng);
  expect_grad_ok([&] {
    Rng local(5);
    return probe(dropout(x, 0.3, local, true));
  }, {x});
}

TEST_F(KernelGradientTest, BinaryCrossEntropy) {
  Tensor logits = random_tensor({6, 1}, rng, true, 3.0);
  const Tensor labels = Tensor::from_values({6, 1}, {1, 0, 1, 1, 0, 0});
  expect_grad_ok([&] { return bce_with_logits(logits, labels); }, {logits});
}

TEST_F(KernelGradientTest, GroupedScoresAndMix) {
  Tensor q = random_tensor({2, 4}, rng);
  Tensor k = random_tensor({6, 4}, rng);
  Tensor w = random_tensor({4, 3}, rng);
  expect_grad_ok([&] { return probe(grouped_scores(q, k, 2)); }, {q, k});
  expect_grad_ok([&] { return probe(grouped_mix(w, k, 2)); }, {w, k});
}

}  // namespace
}  // namespace tgn
