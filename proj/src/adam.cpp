#include "mvcl/adam.hpp"

#include <cmath>

#include "mvcl/common.hpp"

namespace mvcl {

void Adam::step(const std::vector<ParamRef>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(static_cast<size_t>(params[i].value->size()), 0.0);
      v_[i].assign(static_cast<size_t>(params[i].value->size()), 0.0);
    }
  } else if (m_.size() != params.size()) {
    throw NumericError("Adam step called with a different parameter set");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& w = *params[i].value;
    const Tensor& g = *params[i].grad;
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (int64_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

} // namespace mvcl
