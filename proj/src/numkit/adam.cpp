#include "fsb/numkit/adam.hpp"

#include <cmath>

#include "fsb/error.hpp"

namespace fsb::numkit {

Adam::Adam(std::size_t n, Options opt) : opt_(opt), m_(n, 0.0f), v_(n, 0.0f) {}

void Adam::step(std::span<float> params, std::span<const float> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("adam: parameter count changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(opt_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(opt_.beta2), static_cast<double>(t_));
  const float step = static_cast<float>(opt_.lr * std::sqrt(bc2) / bc1);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = opt_.beta1 * m_[i] + (1.0f - opt_.beta1) * grads[i];
    v_[i] = opt_.beta2 * v_[i] + (1.0f - opt_.beta2) * grads[i] * grads[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) + opt_.eps);
  }
}

}  // namespace fsb::numkit
