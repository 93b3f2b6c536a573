#include "tgn/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tgn {

double GradCheckResult::max_relative_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.relative_error);
  return worst;
}

GradCheckResult check_gradients(const std::function<Tensor()>& loss,
                                std::vector<Tensor> inputs,
                                std::vector<std::string> names, double step,
                                double floor) {
  for (Tensor& t : inputs) {
    if (!t.requires_grad()) {
      throw std::invalid_argument("check_gradients: input does not require grad");
    }
    t.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(loss());
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& t = inputs[k];
    GradCheckEntry entry;
    entry.name = k < names.size() ? names[k] : "input" + std::to_string(k);
    double diff2 = 0.0;
    double a2 = 0.0;
    double n2 = 0.0;
    auto values = t.mutable_values();
    const auto grad = t.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Scalar saved = values[i];
      values[i] = static_cast<Scalar>(saved + step);
      const double plus = loss().item();
      values[i] = static_cast<Scalar>(saved - step);
      const double minus = loss().item();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double analytic = grad[i];
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
    }
    entry.analytic_norm = std::sqrt(a2);
    entry.numeric_norm = std::sqrt(n2);
    entry.relative_error =
        std::sqrt(diff2) /
        std::max({entry.analytic_norm, entry.numeric_norm, floor});
    result.entries.push_back(std::move(entry));
  }
  return result;
}

}  // namespace tgn
