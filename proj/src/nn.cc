#include "tgn/nn.h"

#include <array>
#include <cmath>
#include <stdexcept>

namespace tgn {
namespace {

std::string join(std::string_view prefix, std::string_view name) {
  return std::string(prefix) + "." + std::string(name);
}

Tensor one_minus(const Tensor& x) { return add_scalar(scale(x, -1), 1); }

}  // namespace

Tensor uniform_parameter(Shape shape, double limit, Rng& rng) {
  Tensor t = Tensor::zeros(shape, /*requires_grad=*/true);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Scalar& v : t.mutable_values()) v = static_cast<Scalar>(dist(rng));
  return t;
}

double glorot_limit(std::int64_t fan_in, std::int64_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Linear::Linear(std::int64_t in, std::int64_t out, Rng& rng, bool with_bias)
    : weight(uniform_parameter({out, in}, glorot_limit(in, out), rng)) {
  if (with_bias) bias = Tensor::zeros({1, out}, /*requires_grad=*/true);
}

void Linear::collect(ParameterList& out, std::string_view prefix) const {
  out.push_back({join(prefix, "weight"), weight});
  if (bias.defined()) out.push_back({join(prefix, "bias"), bias});
}

MergeLayer::MergeLayer(std::int64_t left, std::int64_t right,
                       std::int64_t hidden, std::int64_t out, Rng& rng)
    : fc1(left + right, hidden, rng), fc2(hidden, out, rng) {}

Tensor MergeLayer::operator()(const Tensor& left, const Tensor& right) const {
  const std::array<Tensor, 2> parts{left, right};
  return fc2(relu(fc1(concat_cols(parts))));
}

void MergeLayer::collect(ParameterList& out, std::string_view prefix) const {
  fc1.collect(out, join(prefix, "fc1"));
  fc2.collect(out, join(prefix, "fc2"));
}

GruParams GruParams::init(std::int64_t input_dim, std::int64_t hidden_dim,
                          Rng& rng) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  GruParams p;
  p.input_weight = uniform_parameter({3 * hidden_dim, input_dim}, limit, rng);
  p.hidden_weight = uniform_parameter({3 * hidden_dim, hidden_dim}, limit, rng);
  p.input_bias = uniform_parameter({1, 3 * hidden_dim}, limit, rng);
  p.hidden_bias = uniform_parameter({1, 3 * hidden_dim}, limit, rng);
  return p;
}

void GruParams::collect(ParameterList& out, std::string_view prefix) const {
  out.push_back({join(prefix, "input_weight"), input_weight});
  out.push_back({join(prefix, "hidden_weight"), hidden_weight});
  out.push_back({join(prefix, "input_bias"), input_bias});
  out.push_back({join(prefix, "hidden_bias"), hidden_bias});
}

Tensor gru_cell(const Tensor& message, const Tensor& state,
                const GruParams& params) {
  const std::int64_t d = params.hidden_dim();
  if (message.cols() != params.input_dim()) {
    throw std::invalid_argument(
        "gru_cell: message width " + std::to_string(message.cols()) +
        " does not match input dim " + std::to_string(params.input_dim()));
  }
  if (state.cols() != d || state.rows() != message.rows()) {
    throw std::invalid_argument("gru_cell: state shape " +
                                state.shape().str() + " vs message shape " +
                                message.shape().str() + " with hidden dim " +
                                std::to_string(d));
  }
  const Tensor gi = linear(message, params.input_weight, params.input_bias);
  const Tensor gh = linear(state, params.hidden_weight, params.hidden_bias);
  const Tensor reset =
      sigmoid(add(slice_cols(gi, 0, d), slice_cols(gh, 0, d)));
  const Tensor update =
      sigmoid(add(slice_cols(gi, d, 2 * d), slice_cols(gh, d, 2 * d)));
  const Tensor candidate = tanh(add(slice_cols(gi, 2 * d, 3 * d),
                                    mul(reset, slice_cols(gh, 2 * d, 3 * d))));
  return add(mul(one_minus(update), state), mul(update, candidate));
}

RnnParams RnnParams::init(std::int64_t input_dim, std::int64_t hidden_dim,
                          Rng& rng) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  RnnParams p;
  p.input_weight = uniform_parameter({hidden_dim, input_dim}, limit, rng);
  p.hidden_weight = uniform_parameter({hidden_dim, hidden_dim}, limit, rng);
  p.input_bias = uniform_parameter({1, hidden_dim}, limit, rng);
  p.hidden_bias = uniform_parameter({1, hidden_dim}, limit, rng);
  return p;
}

void RnnParams::collect(ParameterList& out, std::string_view prefix) const {
  out.push_back({join(prefix, "input_weight"), input_weight});
  out.push_back({join(prefix, "hidden_weight"), hidden_weight});
  out.push_back({join(prefix, "input_bias"), input_bias});
  out.push_back({join(prefix, "hidden_bias"), hidden_bias});
}

Tensor rnn_cell(const Tensor& message, const Tensor& state,
                const RnnParams& params) {
  if (message.cols() != params.input_dim() ||
      state.cols() != params.hidden_dim() || state.rows() != message.rows()) {
    throw std::invalid_argument("rnn_cell: message " + message.shape().str() +
                                " / state " + state.shape().str() +
                                " do not match cell dims");
  }
  return tanh(add(linear(message, params.input_weight, params.input_bias),
                  linear(state, params.hidden_weight, params.hidden_bias)));
}

MultiHeadAttention::MultiHeadAttention(std::int64_t query_dim,
                                       std::int64_t key_dim,
                                       std::int64_t heads, Rng& rng)
    : query(query_dim, query_dim, rng),
      key(key_dim, query_dim, rng),
      value(key_dim, query_dim, rng),
      output(query_dim, query_dim, rng),
      heads_(heads) {
  if (heads <= 0 || query_dim % heads != 0) {
    throw std::invalid_argument(
        "multi_head_attention: model width " + std::to_string(query_dim) +
        " not divisible into " + std::to_string(heads) + " heads");
  }
}

AttentionOutput MultiHeadAttention::operator()(
    const Tensor& queries, const Tensor& keys, const Tensor& values,
    std::span<const std::uint8_t> valid, double dropout_p, Rng& rng,
    bool training) const {
  const std::int64_t batch = queries.rows();
  if (keys.rows() != values.rows()) {
    throw std::invalid_argument("multi_head_attention: key rows " +
                                keys.shape().str() + " vs value rows " +
                                values.shape().str());
  }
  if (batch == 0 ? keys.rows() != 0 : keys.rows() % batch != 0) {
    throw std::invalid_argument(
        "multi_head_attention: " + keys.shape().str() +
        " keys are not a whole number of rows per query " +
        queries.shape().str());
  }
  if (static_cast<std::int64_t>(valid.size()) != keys.rows()) {
    throw std::invalid_argument("multi_head_attention: mask length " +
                                std::to_string(valid.size()) + " vs " +
                                std::to_string(keys.rows()) + " key rows");
  }
  const std::int64_t k = batch == 0 ? 0 : keys.rows() / batch;

  const Tensor q = query(queries);
  const Tensor kk = key(keys);
  const Tensor vv = value(values);
  const Tensor scores = grouped_scores(q, kk, heads_);

  const auto mask_size = static_cast<std::size_t>(batch * heads_ * k);
  std::vector<std::uint8_t> head_mask(mask_size);
  std::vector<Scalar> row_keep(static_cast<std::size_t>(batch), Scalar{0});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t j = 0; j < k; ++j) {
      const bool v = valid[static_cast<std::size_t>(b * k + j)];
      if (v) row_keep[static_cast<std::size_t>(b)] = Scalar{1};
      for (std::int64_t h = 0; h < heads_; ++h) {
        head_mask[static_cast<std::size_t>((b * heads_ + h) * k + j)] = v ? 1 : 0;
      }
    }
  }
  Tensor weights = softmax_rows(scores, head_mask);
  const Tensor attended = dropout(weights, dropout_p, rng, training);
  Tensor out = output(grouped_mix(attended, vv, heads_));

  bool any_empty = false;
  for (Scalar keep : row_keep) any_empty |= keep == Scalar{0};
  if (any_empty) {
    Tensor keep_mask = Tensor::zeros(out.shape());
    auto km = keep_mask.mutable_values();
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t c = 0; c < out.cols(); ++c) {
        km[static_cast<std::size_t>(b * out.cols() + c)] =
            row_keep[static_cast<std::size_t>(b)];
      }
    }
    out = mul(out, keep_mask);
  }
  return {out, weights};
}

void MultiHeadAttention::collect(ParameterList& out,
                                 std::string_view prefix) const {
  query.collect(out, join(prefix, "query"));
  key.collect(out, join(prefix, "key"));
  value.collect(out, join(prefix, "value"));
  output.collect(out, join(prefix, "output"));
}

}  // namespace tgn
