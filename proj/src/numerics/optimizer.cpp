#include "clarigen/numerics/optimizer.h"

#include <cmath>

#include "clarigen/error.h"
#include "clarigen/simd/kernels.h"

namespace clarigen::numerics {

Adam::Adam(const ParameterSet& params, AdamConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) {
    throw ContractError("Adam: learning rate must be positive");
  }
  for (const Parameter& p : params) {
    first_.emplace_back(p.value.shape());
    second_.emplace_back(p.value.shape());
  }
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  const double norm = params.grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (Parameter& p : params) {
      if (p.has_grad) {
        simd::active().scale(f, p.grad.data(), p.grad.data(), p.grad.size());
      }
    }
  }
  return norm;
}

void Adam::step(ParameterSet& params) {
  if (params.size() != first_.size()) {
    throw ContractError("Adam: parameter set has " + std::to_string(params.size()) +
                        " entries, optimizer state has " +
                        std::to_string(first_.size()));
  }
  bool any = false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].value.shape() != first_[i].shape()) {
      throw ContractError("Adam: shape of " + params[i].name + " changed");
    }
    any = any || params[i].has_grad;
  }
  if (!any) throw ContractError("Adam: step() called with no gradients");

  clip_grad_norm(params, config_.clip_norm);
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double step_size =
      config_.learning_rate / (1.0 - std::pow(config_.beta1, t));
  const double v_correction = 1.0 / (1.0 - std::pow(config_.beta2, t));
  const auto& k = simd::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.has_grad) continue;
    k.adam(p.value.data(), p.grad.data(), first_[i].data(), second_[i].data(),
           p.value.size(), config_.beta1, config_.beta2, step_size, v_correction,
           config_.epsilon);
    p.has_grad = false;
  }
}

}  // namespace clarigen::numerics
