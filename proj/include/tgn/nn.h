// Parameterized building blocks: linear layers, two-layer merge MLPs,
// recurrent memory cells and multi-head attention.

#ifndef TGN_NN_H_
#define TGN_NN_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tgn/ops.h"
#include "tgn/tensor.h"

namespace tgn {

struct Parameter {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<Parameter>;

// Uniform(-limit, limit) leaf tensor that requires a gradient.
Tensor uniform_parameter(Shape shape, double limit, Rng& rng);
// Glorot/Xavier uniform limit sqrt(6 / (fan_in + fan_out)).
double glorot_limit(std::int64_t fan_in, std::int64_t fan_out);

class Linear {
 public:
  Linear() = default;
  Linear(std::int64_t in, std::int64_t out, Rng& rng, bool with_bias = true);

  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  std::int64_t in_features() const { return weight.cols(); }
  std::int64_t out_features() const { return weight.rows(); }
  void collect(ParameterList& out, std::string_view prefix) const;

  Tensor weight;  // out x in
  Tensor bias;    // 1 x out, may be undefined
};

// fc2(relu(fc1(a || b))).
class MergeLayer {
 public:
  MergeLayer() = default;
  MergeLayer(std::int64_t left, std::int64_t right, std::int64_t hidden,
             std::int64_t out, Rng& rng);

  Tensor operator()(const Tensor& left, const Tensor& right) const;
  void collect(ParameterList& out, std::string_view prefix) const;

  Linear fc1;
  Linear fc2;
};

// Gate blocks are stacked [reset; update; candidate] along the rows.
struct GruParams {
  Tensor input_weight;   // 3d x m
  Tensor hidden_weight;  // 3d x d
  Tensor input_bias;     // 1 x 3d
  Tensor hidden_bias;    // 1 x 3d

  static GruParams init(std::int64_t input_dim, std::int64_t hidden_dim,
                        Rng& rng);
  std::int64_t hidden_dim() const { return hidden_weight.cols(); }
  std::int64_t input_dim() const { return input_weight.cols(); }
  void collect(ParameterList& out, std::string_view prefix) const;
};

// r = sigmoid(W_ir m + b_ir + W_hr s + b_hr)
// z = sigmoid(W_iz m + b_iz + W_hz s + b_hz)
// c = tanh(W_ic m + b_ic + r * (W_hc s + b_hc))
// s' = (1 - z) * s + z * c
// Rows of m and s are independent samples.
Tensor gru_cell(const Tensor& message, const Tensor& state,
                const GruParams& params);

struct RnnParams {
  Tensor input_weight;   // d x m
  Tensor hidden_weight;  // d x d
  Tensor input_bias;     // 1 x d
  Tensor hidden_bias;    // 1 x d

  static RnnParams init(std::int64_t input_dim, std::int64_t hidden_dim,
                        Rng& rng);
  std::int64_t hidden_dim() const { return hidden_weight.cols(); }
  std::int64_t input_dim() const { return input_weight.cols(); }
  void collect(ParameterList& out, std::string_view prefix) const;
};

// s' = tanh(W_i m + b_i + W_h s + b_h)
Tensor rnn_cell(const Tensor& message, const Tensor& state,
                const RnnParams& params);

struct AttentionOutput {
  Tensor output;   // B x model_dim
  Tensor weights;  // (B * heads) x k, rows sum to 1 or are all zero
};

// Scaled dot-product attention of each query row over its own block of k
// key/value rows, split into heads, concatenated and output-projected. The
// model width equals the query width. A query whose keys are all masked out
// gets a zero output row.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(std::int64_t query_dim, std::int64_t key_dim,
                     std::int64_t heads, Rng& rng);

  // queries: B x query_dim; keys, values: (B*k) x key_dim; valid: B*k flags.
  AttentionOutput operator()(const Tensor& queries, const Tensor& keys,
                             const Tensor& values, std::span<const std::uint8_t> valid,
                             double dropout_p, Rng& rng, bool training) const;

  std::int64_t heads() const { return heads_; }
  std::int64_t model_dim() const { return query.out_features(); }
  void collect(ParameterList& out, std::string_view prefix) const;

  Linear query;
  Linear key;
  Linear value;
  Linear output;

 private:
  std::int64_t heads_ = 1;
};

}  // namespace tgn

#endif  // TGN_NN_H_
