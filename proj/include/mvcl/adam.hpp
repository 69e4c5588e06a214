#pragma once

#include <cstdint>
#include <vector>

#include "mvcl/layers.hpp"

namespace mvcl {

// Adam with bias correction. State is keyed by parameter order, so the same
// params() vector must be passed to every step; moment estimates never leave
// the optimizer (checkpoints carry parameters only).
class Adam {
public:
  Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<ParamRef>& params);

private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

} // namespace mvcl
