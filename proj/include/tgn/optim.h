#ifndef TGN_OPTIM_H_
#define TGN_OPTIM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "tgn/nn.h"
#include "tgn/tensor.h"

namespace tgn {

struct AdamState {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  // One accumulator per parameter, same element count, zero-initialized.
  std::vector<std::vector<Scalar>> first_moment;
  std::vector<std::vector<Scalar>> second_moment;

  static AdamState for_parameters(std::span<const Tensor> params,
                                  double learning_rate);
};

// One bias-corrected Adam update of every parameter from its accumulated
// gradient. Throws std::invalid_argument when the state no longer matches the
// parameter shapes.
void adam_step(std::span<Tensor> params, AdamState& state);

class Adam {
 public:
  Adam(const ParameterList& params, double learning_rate);

  void step() { adam_step(params_, state_); }
  void zero_grad();
  const AdamState& state() const { return state_; }

 private:
  std::vector<Tensor> params_;
  AdamState state_;
};

}  // namespace tgn

#endif  // TGN_OPTIM_H_
