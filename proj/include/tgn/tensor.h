// Dense row-major matrices with an optional gradient accumulator, plus the
// tape that records kernels for reverse-mode differentiation.
//
// Every tensor is rank 2 (rows x cols); vectors are 1 x n rows and scalars are
// 1 x 1. Kernels in ops.h record themselves on the tape installed by the
// innermost TapeScope on the calling thread, but only when at least one input
// requires a gradient. Without an active tape the kernels run in inference
// mode and produce constant tensors.

#ifndef TGN_TENSOR_H_
#define TGN_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tgn {

#ifdef TGN_SCALAR_FLOAT
using Scalar = float;
#else
using Scalar = double;
#endif

struct Shape {
  std::int64_t rows = 0;
  std::int64_t cols = 0;

  std::int64_t numel() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

namespace detail {

// Vectorized kernels peel differently depending on where a buffer starts, so
// heap placement would leak into the rounding of every reduction. A fixed
// alignment keeps results independent of allocation history.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlignment); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Storage = std::vector<Scalar, AlignedAllocator<Scalar>>;

struct TensorImpl {
  Shape shape;
  Storage values;
  // Sized to values.size() iff requires_grad.
  Storage grad;
  bool requires_grad = false;
  // Set when backward() has pushed a gradient into this tensor.
  bool grad_touched = false;

  void accumulate(std::size_t i, Scalar g) {
    grad[i] += g;
    grad_touched = true;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, Scalar value);
  static Tensor from_values(Shape shape, std::vector<Scalar> values,
                            bool requires_grad = false);
  static Tensor row(std::vector<Scalar> values, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::int64_t rows() const { return impl_->shape.rows; }
  std::int64_t cols() const { return impl_->shape.cols; }
  std::int64_t numel() const { return impl_->shape.numel(); }

  std::span<const Scalar> values() const { return impl_->values; }
  // Direct write access; only for leaves (parameters, constants under
  // construction). Mutating a tensor already recorded on a tape invalidates
  // the recorded backward pass.
  std::span<Scalar> mutable_values() { return impl_->values; }
  std::span<const Scalar> row_values(std::int64_t r) const;

  Scalar operator()(std::int64_t r, std::int64_t c) const {
    return impl_->values[static_cast<std::size_t>(r * cols() + c)];
  }
  // Value of a 1x1 tensor.
  Scalar item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  std::span<const Scalar> grad() const { return impl_->grad; }
  std::span<Scalar> mutable_grad() { return impl_->grad; }
  void zero_grad();

  // Copy of the values with no gradient tracking.
  Tensor detach() const;

  detail::TensorImpl& impl() const { return *impl_; }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

  std::shared_ptr<detail::TensorImpl> impl_;
};

// Ordered record of executed kernels. Every recorded output is produced after
// its inputs, so walking the record backwards is a valid reverse topological
// order.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(std::string_view kernel, const Tensor& output, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and visits every recorded kernel once, newest
  // first. Gradients of leaves accumulate across calls; gradients of recorded
  // intermediates are reset at the start of each call.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  std::vector<std::string_view> kernels() const;
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::string_view kernel;
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

// Installs a tape as the recording target for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording on the current thread; kernels run in inference mode.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// Convenience: records on the active tape and runs backward on it.
void backward(const Tensor& loss);

}  // namespace tgn

#endif  // TGN_TENSOR_H_
