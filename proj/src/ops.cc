#include "tgn/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace tgn {
namespace {

using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap values_of(const Tensor& t) {
  return {t.impl().values.data(), t.rows(), t.cols()};
}
ConstMatrixMap grad_of(const Tensor& t) {
  return {t.impl().grad.data(), t.rows(), t.cols()};
}
MatrixMap mutable_values_of(Tensor& t) {
  return {t.impl().values.data(), t.rows(), t.cols()};
}
// Marks the tensor as having received a gradient and returns its accumulator.
MatrixMap grad_sink(const Tensor& t) {
  t.impl().grad_touched = true;
  return {t.impl().grad.data(), t.rows(), t.cols()};
}

[[noreturn]] void shape_error(std::string_view kernel, const Tensor& a,
                              const Tensor& b, std::string_view what = {}) {
  std::string msg = std::string(kernel) + ": shape mismatch " +
                    a.shape().str() + " vs " + b.shape().str();
  if (!what.empty()) msg += " (" + std::string(what) + ")";
  throw std::invalid_argument(msg);
}

void require_defined(std::string_view kernel, const Tensor& t) {
  if (!t.defined()) {
    throw std::invalid_argument(std::string(kernel) + ": undefined input");
  }
}

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

bool tracking(std::span<const Tensor> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

void record(std::string_view kernel, const Tensor& out, Tape::BackwardFn fn) {
  active_tape()->record(kernel, out, std::move(fn));
}

template <typename Forward, typename Derivative>
Tensor unary(std::string_view kernel, const Tensor& x, Forward f,
             Derivative df) {
  require_defined(kernel, x);
  const bool track = tracking({&x});
  Tensor out = Tensor::zeros(x.shape(), track);
  auto xs = x.values();
  auto ys = out.mutable_values();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
  if (track) {
    record(kernel, out, [x, out, df] {
      auto& xi = x.impl();
      const auto& yi = out.impl();
      for (std::size_t i = 0; i < xi.values.size(); ++i) {
        xi.grad[i] += yi.grad[i] * df(xi.values[i], yi.values[i]);
      }
      xi.grad_touched = true;
    });
  }
  return out;
}

Scalar stable_sigmoid(Scalar v) {
  if (v >= 0) return Scalar{1} / (Scalar{1} + std::exp(-v));
  const Scalar e = std::exp(v);
  return e / (Scalar{1} + e);
}

void check_offsets(std::string_view kernel, const Tensor& x,
                   std::span<const std::int64_t> offsets) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != x.rows()) {
    throw std::invalid_argument(std::string(kernel) +
                                ": offsets must start at 0 and end at rows " +
                                x.shape().str());
  }
  for (std::size_t g = 1; g < offsets.size(); ++g) {
    if (offsets[g] < offsets[g - 1]) {
      throw std::invalid_argument(std::string(kernel) +
                                  ": offsets must be non-decreasing");
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined("add", a);
  require_defined("add", b);
  if (a.shape() != b.shape()) shape_error("add", a, b);
  const bool track = tracking({&a, &b});
  Tensor out = Tensor::zeros(a.shape(), track);
  mutable_values_of(out) = values_of(a) + values_of(b);
  if (track) {
    record("add", out, [a, b, out] {
      if (a.requires_grad()) grad_sink(a) += grad_of(out);
      if (b.requires_grad()) grad_sink(b) += grad_of(out);
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined("sub", a);
  require_defined("sub", b);
  if (a.shape() != b.shape()) shape_error("sub", a, b);
  const bool track = tracking({&a, &b});
  Tensor out = Tensor::zeros(a.shape(), track);
  mutable_values_of(out) = values_of(a) - values_of(b);
  if (track) {
    record("sub", out, [a, b, out] {
      if (a.requires_grad()) grad_sink(a) += grad_of(out);
      if (b.requires_grad()) grad_sink(b) -= grad_of(out);
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined("mul", a);
  require_defined("mul", b);
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  const bool track = tracking({&a, &b});
  Tensor out = Tensor::zeros(a.shape(), track);
  mutable_values_of(out) = values_of(a).cwiseProduct(values_of(b));
  if (track) {
    record("mul", out, [a, b, out] {
      if (a.requires_grad()) {
        grad_sink(a) += grad_of(out).cwiseProduct(values_of(b));
      }
      if (b.requires_grad()) {
        grad_sink(b) += grad_of(out).cwiseProduct(values_of(a));
      }
    });
  }
  return out;
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_defined("add_row", x);
  require_defined("add_row", row);
  if (row.rows() != 1 || row.cols() != x.cols()) {
    shape_error("add_row", x, row, "row must be 1 x cols");
  }
  const bool track = tracking({&x, &row});
  Tensor out = Tensor::zeros(x.shape(), track);
  mutable_values_of(out) = values_of(x).rowwise() + values_of(row).row(0);
  if (track) {
    record("add_row", out, [x, row, out] {
      if (x.requires_grad()) grad_sink(x) += grad_of(out);
      if (row.requires_grad()) {
        grad_sink(row).row(0) += grad_of(out).colwise().sum();
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, Scalar factor) {
  return unary(
      "scale", x, [factor](Scalar v) { return v * factor; },
      [factor](Scalar, Scalar) { return factor; });
}

Tensor add_scalar(const Tensor& x, Scalar offset) {
  return unary(
      "add_scalar", x, [offset](Scalar v) { return v + offset; },
      [](Scalar, Scalar) { return Scalar{1}; });
}

// Forward products are coefficient-based rather than blocked GEMM. Eigen
// picks GEMM blocking (and whether to block at all) from the row count, so a
// row's value would otherwise depend on how many other rows share the batch.

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined("matmul", a);
  require_defined("matmul", b);
  if (a.cols() != b.rows()) shape_error("matmul", a, b, "inner extents");
  const bool track = tracking({&a, &b});
  Tensor out = Tensor::zeros({a.rows(), b.cols()}, track);
  if (a.cols() > 0) {
    mutable_values_of(out).noalias() = values_of(a).lazyProduct(values_of(b));
  }
  if (track) {
    record("matmul", out, [a, b, out] {
      if (a.requires_grad()) {
        grad_sink(a).noalias() += grad_of(out) * values_of(b).transpose();
      }
      if (b.requires_grad()) {
        grad_sink(b).noalias() += values_of(a).transpose() * grad_of(out);
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_defined("linear", x);
  require_defined("linear", weight);
  if (x.cols() != weight.cols()) {
    shape_error("linear", x, weight, "input width vs weight columns");
  }
  if (bias.defined() && (bias.rows() != 1 || bias.cols() != weight.rows())) {
    shape_error("linear", weight, bias, "bias must be 1 x out");
  }
  const bool track = tracking({&x, &weight, &bias});
  Tensor out = Tensor::zeros({x.rows(), weight.rows()}, track);
  auto y = mutable_values_of(out);
  if (x.cols() > 0) y.noalias() = values_of(x).lazyProduct(values_of(weight).transpose());
  if (bias.defined()) y.rowwise() += values_of(bias).row(0);
  if (track) {
    record("linear", out, [x, weight, bias, out] {
      const auto go = grad_of(out);
      if (x.requires_grad()) grad_sink(x).noalias() += go * values_of(weight);
      if (weight.requires_grad()) {
        grad_sink(weight).noalias() += go.transpose() * values_of(x);
      }
      if (bias.defined() && bias.requires_grad()) {
        grad_sink(bias).row(0) += go.colwise().sum();
      }
    });
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::int64_t rows = parts.front().rows();
  std::int64_t cols = 0;
  for (const Tensor& p : parts) {
    require_defined("concat_cols", p);
    if (p.rows() != rows) shape_error("concat_cols", parts.front(), p);
    cols += p.cols();
  }
  const bool track = tracking(parts);
  Tensor out = Tensor::zeros({rows, cols}, track);
  auto y = mutable_values_of(out);
  std::int64_t offset = 0;
  for (const Tensor& p : parts) {
    y.middleCols(offset, p.cols()) = values_of(p);
    offset += p.cols();
  }
  if (track) {
    std::vector<Tensor> saved(parts.begin(), parts.end());
    record("concat_cols", out, [saved, out] {
      const auto go = grad_of(out);
      std::int64_t off = 0;
      for (const Tensor& p : saved) {
        if (p.requires_grad()) grad_sink(p) += go.middleCols(off, p.cols());
        off += p.cols();
      }
    });
  }
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::int64_t cols = parts.front().cols();
  std::int64_t rows = 0;
  for (const Tensor& p : parts) {
    require_defined("concat_rows", p);
    if (p.cols() != cols) shape_error("concat_rows", parts.front(), p);
    rows += p.rows();
  }
  const bool track = tracking(parts);
  Tensor out = Tensor::zeros({rows, cols}, track);
  auto y = mutable_values_of(out);
  std::int64_t offset = 0;
  for (const Tensor& p : parts) {
    y.middleRows(offset, p.rows()) = values_of(p);
    offset += p.rows();
  }
  if (track) {
    std::vector<Tensor> saved(parts.begin(), parts.end());
    record("concat_rows", out, [saved, out] {
      const auto go = grad_of(out);
      std::int64_t off = 0;
      for (const Tensor& p : saved) {
        if (p.requires_grad()) grad_sink(p) += go.middleRows(off, p.rows());
        off += p.rows();
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::int64_t begin, std::int64_t end) {
  require_defined("slice_cols", x);
  if (begin < 0 || end < begin || end > x.cols()) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(begin) +
                                ", " + std::to_string(end) + ") outside " +
                                x.shape().str());
  }
  const bool track = tracking({&x});
  Tensor out = Tensor::zeros({x.rows(), end - begin}, track);
  mutable_values_of(out) = values_of(x).middleCols(begin, end - begin);
  if (track) {
    record("slice_cols", out, [x, out, begin] {
      grad_sink(x).middleCols(begin, out.cols()) += grad_of(out);
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& x, std::int64_t begin, std::int64_t end) {
  require_defined("slice_rows", x);
  if (begin < 0 || end < begin || end > x.rows()) {
    throw std::invalid_argument("slice_rows: range [" + std::to_string(begin) +
                                ", " + std::to_string(end) + ") outside " +
                                x.shape().str());
  }
  const bool track = tracking({&x});
  Tensor out = Tensor::zeros({end - begin, x.cols()}, track);
  mutable_values_of(out) = values_of(x).middleRows(begin, end - begin);
  if (track) {
    record("slice_rows", out, [x, out, begin] {
      grad_sink(x).middleRows(begin, out.rows()) += grad_of(out);
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> indices) {
  require_defined("gather_rows", x);
  for (std::int64_t i : indices) {
    if (i < 0 || i >= x.rows()) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(i) +
                                  " outside " + x.shape().str());
    }
  }
  const bool track = tracking({&x});
  const auto n = static_cast<std::int64_t>(indices.size());
  Tensor out = Tensor::zeros({n, x.cols()}, track);
  auto y = mutable_values_of(out);
  const auto xs = values_of(x);
  for (std::int64_t r = 0; r < n; ++r) y.row(r) = xs.row(indices[r]);
  if (track) {
    std::vector<std::int64_t> saved(indices.begin(), indices.end());
    record("gather_rows", out, [x, out, saved] {
      auto gx = grad_sink(x);
      const auto go = grad_of(out);
      for (std::size_t r = 0; r < saved.size(); ++r) {
        gx.row(saved[r]) += go.row(static_cast<std::int64_t>(r));
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  require_defined("sum", x);
  const bool track = tracking({&x});
  Tensor out = Tensor::zeros({1, 1}, track);
  out.mutable_values()[0] = values_of(x).sum();
  if (track) {
    record("sum", out, [x, out] {
      grad_sink(x).array() += out.impl().grad[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  require_defined("mean", x);
  if (x.numel() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(x), Scalar{1} / static_cast<Scalar>(x.numel()));
}

Tensor segment_sum(const Tensor& x, std::span<const std::int64_t> offsets) {
  require_defined("segment_sum", x);
  check_offsets("segment_sum", x, offsets);
  const auto groups = static_cast<std::int64_t>(offsets.size()) - 1;
  const bool track = tracking({&x});
  Tensor out = Tensor::zeros({groups, x.cols()}, track);
  auto y = mutable_values_of(out);
  const auto xs = values_of(x);
  for (std::int64_t g = 0; g < groups; ++g) {
    for (std::int64_t r = offsets[g]; r < offsets[g + 1]; ++r) {
      y.row(g) += xs.row(r);
    }
  }
  if (track) {
    std::vector<std::int64_t> saved(offsets.begin(), offsets.end());
    record("segment_sum", out, [x, out, saved] {
      auto gx = grad_sink(x);
      const auto go = grad_of(out);
      for (std::size_t g = 0; g + 1 < saved.size(); ++g) {
        for (std::int64_t r = saved[g]; r < saved[g + 1]; ++r) {
          gx.row(r) += go.row(static_cast<std::int64_t>(g));
        }
      }
    });
  }
  return out;
}

Tensor segment_mean(const Tensor& x, std::span<const std::int64_t> offsets) {
  require_defined("segment_mean", x);
  check_offsets("segment_mean", x, offsets);
  const auto groups = static_cast<std::int64_t>(offsets.size()) - 1;
  std::vector<Scalar> inv(static_cast<std::size_t>(groups));
  for (std::int64_t g = 0; g < groups; ++g) {
    const std::int64_t n = offsets[g + 1] - offsets[g];
    if (n == 0) {
      throw std::invalid_argument("segment_mean: empty segment " +
                                  std::to_string(g));
    }
    inv[static_cast<std::size_t>(g)] = Scalar{1} / static_cast<Scalar>(n);
  }
  const bool track = tracking({&x});
  Tensor out = Tensor::zeros({groups, x.cols()}, track);
  auto y = mutable_values_of(out);
  const auto xs = values_of(x);
  for (std::int64_t g = 0; g < groups; ++g) {
    for (std::int64_t r = offsets[g]; r < offsets[g + 1]; ++r) {
      y.row(g) += xs.row(r);
    }
    y.row(g) *= inv[static_cast<std::size_t>(g)];
  }
  if (track) {
    std::vector<std::int64_t> saved(offsets.begin(), offsets.end());
    record("segment_mean", out, [x, out, saved, inv] {
      auto gx = grad_sink(x);
      const auto go = grad_of(out);
      for (std::size_t g = 0; g + 1 < saved.size(); ++g) {
        for (std::int64_t r = saved[g]; r < saved[g + 1]; ++r) {
          gx.row(r) += go.row(static_cast<std::int64_t>(g)) * inv[g];
        }
      }
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid,
               [](Scalar, Scalar y) { return y * (Scalar{1} - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](Scalar v) { return std::tanh(v); },
      [](Scalar, Scalar y) { return Scalar{1} - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](Scalar v) { return v > 0 ? v : Scalar{0}; },
      [](Scalar v, Scalar) { return v > 0 ? Scalar{1} : Scalar{0}; });
}

Tensor cos(const Tensor& x) {
  return unary(
      "cos", x, [](Scalar v) { return std::cos(v); },
      [](Scalar v, Scalar) { return -std::sin(v); });
}

Tensor softmax_rows(const Tensor& x, std::span<const std::uint8_t> mask) {
  require_defined("softmax_rows", x);
  if (!mask.empty() && static_cast<std::int64_t>(mask.size()) != x.numel()) {
    throw std::invalid_argument("softmax_rows: mask of " +
                                std::to_string(mask.size()) +
                                " entries for shape " + x.shape().str());
  }
  const bool track = tracking({&x});
  Tensor out = Tensor::zeros(x.shape(), track);
  const auto rows = x.rows();
  const auto cols = x.cols();
  const auto xs = x.values();
  auto ys = out.mutable_values();
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r * cols);
    auto valid = [&](std::int64_t c) {
      return mask.empty() || mask[base + static_cast<std::size_t>(c)];
    };
    Scalar max = -std::numeric_limits<Scalar>::infinity();
    for (std::int64_t c = 0; c < cols; ++c) {
      if (valid(c)) max = std::max(max, xs[base + c]);
    }
    if (max == -std::numeric_limits<Scalar>::infinity()) continue;
    Scalar total = 0;
    for (std::int64_t c = 0; c < cols; ++c) {
      if (!valid(c)) continue;
      ys[base + c] = std::exp(xs[base + c] - max);
      total += ys[base + c];
    }
    for (std::int64_t c = 0; c < cols; ++c) ys[base + c] /= total;
  }
  if (track) {
    record("softmax_rows", out, [x, out] {
      auto gx = grad_sink(x);
      const auto go = grad_of(out);
      const auto y = values_of(out);
      for (std::int64_t r = 0; r < y.rows(); ++r) {
        const Scalar dot = go.row(r).dot(y.row(r));
        gx.row(r).array() +=
            y.row(r).array() * (go.row(r).array() - dot);
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  require_defined("dropout", x);
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout: probability " + std::to_string(p) +
                                " outside [0, 1)");
  }
  if (!training || p == 0.0) return x;
  const bool track = tracking({&x});
  Tensor out = Tensor::zeros(x.shape(), track);
  std::vector<Scalar> factor(static_cast<std::size_t>(x.numel()));
  std::bernoulli_distribution keep(1.0 - p);
  const Scalar kept_scale = static_cast<Scalar>(1.0 / (1.0 - p));
  for (auto& f : factor) f = keep(rng) ? kept_scale : Scalar{0};
  const auto xs = x.values();
  auto ys = out.mutable_values();
  for (std::size_t i = 0; i < factor.size(); ++i) ys[i] = xs[i] * factor[i];
  if (track) {
    record("dropout", out, [x, out, factor = std::move(factor)] {
      auto& xi = x.impl();
      const auto& go = out.impl().grad;
      for (std::size_t i = 0; i < factor.size(); ++i) {
        xi.grad[i] += go[i] * factor[i];
      }
      xi.grad_touched = true;
    });
  }
  return out;
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& labels) {
  require_defined("bce_with_logits", logits);
  require_defined("bce_with_logits", labels);
  if (logits.shape() != labels.shape()) {
    shape_error("bce_with_logits", logits, labels);
  }
  if (logits.numel() == 0) {
    throw std::invalid_argument("bce_with_logits: empty batch");
  }
  for (Scalar y : labels.values()) {
    if (y != Scalar{0} && y != Scalar{1}) {
      throw std::invalid_argument("bce_with_logits: label " +
                                  std::to_string(y) + " not in {0,1}");
    }
  }
  const bool track = tracking({&logits});
  Tensor out = Tensor::zeros({1, 1}, track);
  const auto xs = logits.values();
  const auto ys = labels.values();
  Scalar total = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Scalar v = xs[i];
    total += std::max(v, Scalar{0}) - v * ys[i] +
             std::log1p(std::exp(-std::abs(v)));
  }
  const Scalar n = static_cast<Scalar>(xs.size());
  out.mutable_values()[0] = total / n;
  if (track) {
    record("bce_with_logits", out, [logits, labels, out, n] {
      auto& li = logits.impl();
      const auto ys = labels.values();
      const Scalar g = out.impl().grad[0] / n;
      for (std::size_t i = 0; i < li.values.size(); ++i) {
        li.grad[i] += g * (stable_sigmoid(li.values[i]) - ys[i]);
      }
      li.grad_touched = true;
    });
  }
  return out;
}

Tensor grouped_scores(const Tensor& queries, const Tensor& keys,
                      std::int64_t heads) {
  require_defined("grouped_scores", queries);
  require_defined("grouped_scores", keys);
  const std::int64_t batch = queries.rows();
  const std::int64_t dim = queries.cols();
  if (keys.cols() != dim) {
    shape_error("grouped_scores", queries, keys, "feature widths");
  }
  if (heads <= 0 || dim % heads != 0) {
    throw std::invalid_argument("grouped_scores: width " +
                                std::to_string(dim) +
                                " not divisible into " + std::to_string(heads) +
                                " heads");
  }
  if (batch == 0 ? keys.rows() != 0 : keys.rows() % batch != 0) {
    shape_error("grouped_scores", queries, keys, "keys not k rows per query");
  }
  const std::int64_t k = batch == 0 ? 0 : keys.rows() / batch;
  const std::int64_t head_dim = dim / heads;
  const Scalar s = Scalar{1} / std::sqrt(static_cast<Scalar>(head_dim));
  const bool track = tracking({&queries, &keys});
  Tensor out = Tensor::zeros({batch * heads, k}, track);
  const auto q = values_of(queries);
  const auto kv = values_of(keys);
  auto y = mutable_values_of(out);
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t h = 0; h < heads; ++h) {
      const auto qh = q.row(b).segment(h * head_dim, head_dim);
      for (std::int64_t j = 0; j < k; ++j) {
        y(b * heads + h, j) =
            s * qh.dot(kv.row(b * k + j).segment(h * head_dim, head_dim));
      }
    }
  }
  if (track) {
    record("grouped_scores", out, [queries, keys, out, heads, k, head_dim, s] {
      const auto go = grad_of(out);
      const auto q = values_of(queries);
      const auto kv = values_of(keys);
      const std::int64_t batch = queries.rows();
      if (queries.requires_grad()) {
        auto gq = grad_sink(queries);
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t h = 0; h < heads; ++h) {
            for (std::int64_t j = 0; j < k; ++j) {
              gq.row(b).segment(h * head_dim, head_dim) +=
                  (s * go(b * heads + h, j)) *
                  kv.row(b * k + j).segment(h * head_dim, head_dim);
            }
          }
        }
      }
      if (keys.requires_grad()) {
        auto gk = grad_sink(keys);
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t h = 0; h < heads; ++h) {
            for (std::int64_t j = 0; j < k; ++j) {
              gk.row(b * k + j).segment(h * head_dim, head_dim) +=
                  (s * go(b * heads + h, j)) *
                  q.row(b).segment(h * head_dim, head_dim);
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor grouped_mix(const Tensor& weights, const Tensor& values,
                   std::int64_t heads) {
  require_defined("grouped_mix", weights);
  require_defined("grouped_mix", values);
  if (heads <= 0 || weights.rows() % heads != 0) {
    shape_error("grouped_mix", weights, values, "weight rows vs heads");
  }
  const std::int64_t batch = weights.rows() / heads;
  const std::int64_t k = weights.cols();
  const std::int64_t dim = values.cols();
  if (values.rows() != batch * k || dim % heads != 0) {
    shape_error("grouped_mix", weights, values);
  }
  const std::int64_t head_dim = dim / heads;
  const bool track = tracking({&weights, &values});
  Tensor out = Tensor::zeros({batch, dim}, track);
  const auto w = values_of(weights);
  const auto v = values_of(values);
  auto y = mutable_values_of(out);
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t h = 0; h < heads; ++h) {
      for (std::int64_t j = 0; j < k; ++j) {
        const Scalar wj = w(b * heads + h, j);
        if (wj == Scalar{0}) continue;
        y.row(b).segment(h * head_dim, head_dim) +=
            wj * v.row(b * k + j).segment(h * head_dim, head_dim);
      }
    }
  }
  if (track) {
    record("grouped_mix", out, [weights, values, out, heads, k, head_dim] {
      const auto go = grad_of(out);
      const auto w = values_of(weights);
      const auto v = values_of(values);
      const std::int64_t batch = out.rows();
      if (weights.requires_grad()) {
        auto gw = grad_sink(weights);
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t h = 0; h < heads; ++h) {
            for (std::int64_t j = 0; j < k; ++j) {
              gw(b * heads + h, j) +=
                  go.row(b).segment(h * head_dim, head_dim).dot(
                      v.row(b * k + j).segment(h * head_dim, head_dim));
            }
          }
        }
      }
      if (values.requires_grad()) {
        auto gv = grad_sink(values);
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t h = 0; h < heads; ++h) {
            for (std::int64_t j = 0; j < k; ++j) {
              gv.row(b * k + j).segment(h * head_dim, head_dim) +=
                  w(b * heads + h, j) *
                  go.row(b).segment(h * head_dim, head_dim);
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace tgn
