#include "tgn/tensor.h"

#include <algorithm>
#include <stdexcept>

namespace tgn {
namespace {

thread_local Tape* current_tape = nullptr;

}  // namespace

std::string Shape::str() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  if (shape.rows < 0 || shape.cols < 0) {
    throw std::invalid_argument("tensor: negative extent " + shape.str());
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = shape;
  impl->values.assign(static_cast<std::size_t>(shape.numel()), Scalar{0});
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(impl->values.size(), Scalar{0});
  return Tensor(std::move(impl));
}

Tensor Tensor::filled(Shape shape, Scalar value) {
  Tensor t = zeros(shape);
  std::fill(t.impl_->values.begin(), t.impl_->values.end(), value);
  return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<Scalar> values,
                           bool requires_grad) {
  if (shape.rows < 0 || shape.cols < 0 ||
      static_cast<std::int64_t>(values.size()) != shape.numel()) {
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values do not fill shape " + shape.str());
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = shape;
  impl->values.assign(values.begin(), values.end());
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(impl->values.size(), Scalar{0});
  return Tensor(std::move(impl));
}

Tensor Tensor::row(std::vector<Scalar> values, bool requires_grad) {
  const auto n = static_cast<std::int64_t>(values.size());
  return from_values({1, n}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) {
  return from_values({1, 1}, {value}, requires_grad);
}

std::span<const Scalar> Tensor::row_values(std::int64_t r) const {
  return std::span<const Scalar>(impl_->values)
      .subspan(static_cast<std::size_t>(r * cols()),
               static_cast<std::size_t>(cols()));
}

Scalar Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item: tensor of shape " + shape().str() +
                                " is not a scalar");
  }
  return impl_->values[0];
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), Scalar{0});
}

Tensor Tensor::detach() const {
  return from_values(shape(), std::vector<Scalar>(impl_->values.begin(), impl_->values.end()),
                     false);
}

void Tape::record(std::string_view kernel, const Tensor& output,
                  BackwardFn fn) {
  entries_.push_back({kernel, output.impl_ptr(), std::move(fn)});
}

std::vector<std::string_view> Tape::kernels() const {
  std::vector<std::string_view> names;
  names.reserve(entries_.size());
  for (const auto& e : entries_) names.push_back(e.kernel);
  return names;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument(
        "backward: loss must be a scalar, got shape " +
        (loss.defined() ? loss.shape().str() : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw std::invalid_argument(
        "backward: loss is not connected to any tensor requiring a gradient");
  }
  for (auto& e : entries_) {
    std::fill(e.output->grad.begin(), e.output->grad.end(), Scalar{0});
    e.output->grad_touched = false;
  }
  loss.impl().accumulate(0, Scalar{1});
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->output->grad_touched) continue;
    it->backward();
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(current_tape) {
  current_tape = &tape;
}

TapeScope::~TapeScope() { current_tape = previous_; }

NoGradGuard::NoGradGuard() : previous_(current_tape) { current_tape = nullptr; }

NoGradGuard::~NoGradGuard() { current_tape = previous_; }

Tape* active_tape() { return current_tape; }

void backward(const Tensor& loss) {
  Tape* tape = active_tape();
  if (tape == nullptr) {
    throw std::logic_error("backward: no active tape");
  }
  tape->backward(loss);
}

}  // namespace tgn
