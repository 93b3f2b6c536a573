#include "tgn/time_encoder.h"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgn/ops.h"

namespace tgn {

TimeEncoder::TimeEncoder(std::int64_t dim) {
  if (dim <= 0) {
    throw std::invalid_argument("time encoder: dimension must be positive, got " +
                                std::to_string(dim));
  }
  std::vector<Scalar> omega(static_cast<std::size_t>(dim));
  for (std::int64_t i = 0; i < dim; ++i) {
    const double exponent = dim == 1 ? 0.0 : 9.0 * static_cast<double>(i) /
                                                 static_cast<double>(dim - 1);
    omega[static_cast<std::size_t>(i)] =
        static_cast<Scalar>(std::pow(10.0, -exponent));
  }
  frequency = Tensor::row(std::move(omega), true);
  phase = Tensor::zeros({1, dim}, true);
}

Tensor TimeEncoder::operator()(std::span<const double> deltas) const {
  std::vector<Scalar> column;
  column.reserve(deltas.size());
  for (double dt : deltas) {
    if (!(dt >= 0.0) || !std::isfinite(dt)) {
      throw std::invalid_argument("time_encode: negative or non-finite delta " +
                                  std::to_string(dt));
    }
    column.push_back(static_cast<Scalar>(dt));
  }
  const auto n = static_cast<std::int64_t>(deltas.size());
  const Tensor dt = Tensor::from_values({n, 1}, std::move(column));
  return cos(add_row(matmul(dt, frequency), phase));
}

Tensor TimeEncoder::encode(double delta) const {
  const double d[1] = {delta};
  return (*this)(d);
}

void TimeEncoder::collect(ParameterList& out, std::string_view prefix) const {
  out.push_back({std::string(prefix) + ".frequency", frequency});
  out.push_back({std::string(prefix) + ".phase", phase});
}

}  // namespace tgn
