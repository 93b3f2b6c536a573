#include "tgn/optim.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tgn {

AdamState AdamState::for_parameters(std::span<const Tensor> params,
                                    double learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  for (const Tensor& p : params) {
    const auto n = static_cast<std::size_t>(p.numel());
    state.first_moment.emplace_back(n, Scalar{0});
    state.second_moment.emplace_back(n, Scalar{0});
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument(
        "adam_step: state tracks " + std::to_string(state.first_moment.size()) +
        " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto n = static_cast<std::size_t>(params[i].numel());
    if (state.first_moment[i].size() != n ||
        state.second_moment[i].size() != n || params[i].grad().size() != n) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                  " of shape " + params[i].shape().str() +
                                  " no longer matches its optimizer state");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    const auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = static_cast<Scalar>(b1 * m[j] + (1.0 - b1) * g);
      v[j] = static_cast<Scalar>(b2 * v[j] + (1.0 - b2) * g * g);
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] -= static_cast<Scalar>(state.learning_rate * m_hat /
                                       (std::sqrt(v_hat) + state.epsilon));
    }
  }
}

Adam::Adam(const ParameterList& params, double learning_rate) {
  for (const auto& p : params) params_.push_back(p.tensor);
  state_ = AdamState::for_parameters(params_, learning_rate);
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace tgn
