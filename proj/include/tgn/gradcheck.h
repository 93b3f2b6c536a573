// Central finite-difference comparison against reverse-mode gradients.

#ifndef TGN_GRADCHECK_H_
#define TGN_GRADCHECK_H_

#include <functional>
#include <string>
#include <vector>

#include "tgn/tensor.h"

namespace tgn {

struct GradCheckEntry {
  std::string name;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  // ||analytic - numeric|| / max(||analytic||, ||numeric||, floor)
  double relative_error = 0.0;
};

struct GradCheckResult {
  std::vector<GradCheckEntry> entries;
  double max_relative_error() const;
};

// `loss` must be a deterministic function of the tensors in `inputs`, which
// are perturbed in place one element at a time.
GradCheckResult check_gradients(const std::function<Tensor()>& loss,
                                std::vector<Tensor> inputs,
                                std::vector<std::string> names = {},
                                double step = 1e-5, double floor = 1e-8);

}  // namespace tgn

#endif  // TGN_GRADCHECK_H_
