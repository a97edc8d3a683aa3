#pragma once

#include <cstddef>
#include <vector>

#include "clarigen/numerics/parameter.h"

namespace clarigen::numerics {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Global gradient-norm clip applied before each step; <= 0 disables.
  double clip_norm = 5.0;
};

// Adam with one moment pair per registered parameter. The state is bound to
// the layout of one ParameterSet; stepping a set with a different layout is
// a contract error.
class Adam {
 public:
  Adam(const ParameterSet& params, AdamConfig config = {});

  // Clips, updates every parameter that received a gradient, zeroes grads.
  // Throws if no parameter has a gradient.
  void step(ParameterSet& params);

  std::size_t steps() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  std::size_t entries() const { return first_.size(); }

 private:
  AdamConfig config_;
  std::size_t step_count_ = 0;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
};

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

}  // namespace clarigen::numerics
