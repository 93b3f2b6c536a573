// Learnable harmonic time encoding phi(dt) = cos(dt * omega + b).

#ifndef TGN_TIME_ENCODER_H_
#define TGN_TIME_ENCODER_H_

#include <cstdint>
#include <span>
#include <string_view>

#include "tgn/nn.h"
#include "tgn/tensor.h"

namespace tgn {

class TimeEncoder {
 public:
  TimeEncoder() = default;
  // omega_i = 10^(-9 i / (dim - 1)), b = 0.
  explicit TimeEncoder(std::int64_t dim);

  // One row per delta. Throws std::invalid_argument for negative or
  // non-finite deltas.
  Tensor operator()(std::span<const double> deltas) const;
  Tensor encode(double delta) const;

  std::int64_t dim() const { return frequency.cols(); }
  void collect(ParameterList& out, std::string_view prefix) const;

  Tensor frequency;  // 1 x dim
  Tensor phase;      // 1 x dim
};

}  // namespace tgn

#endif  // TGN_TIME_ENCODER_H_
