#include "pfsplat/optim.hpp"

#include "pfsplat/errors.hpp"

#include <cmath>

namespace pfsplat {

void Adam::step(std::span<double> params, std::span<const double> grads, double lr_scale) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw InvalidArgument("Adam::step: parameter and gradient sizes differ from the optimizer state");
  }
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = options_.lr * lr_scale;
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i] * grads[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + options_.eps);
  }
}

}  // namespace pfsplat
