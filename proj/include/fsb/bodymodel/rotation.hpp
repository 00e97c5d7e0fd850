#pragma once

#include <span>

#include "fsb/bodymodel/mat3.hpp"

namespace fsb::body {

// Axis-angle to rotation matrix. Below |w| = 1e-6 uses I + [w]x + [w]x^2 / 2.
Mat3 rodrigues(std::span<const float, 3> w);

// Given dL/dR for R = rodrigues(w), returns dL/dw.
Vec3 rodrigues_backward(std::span<const float, 3> w, const Mat3& grad_r);

}  // namespace fsb::body
