#include "fsb/bodymodel/rotation.hpp"

#include <cmath>

namespace fsb::body {
namespace {

constexpr double kSmallAngle = 1e-6;

// Skew matrices and products are formed in double, the result rounded once.
using M3d = std::array<double, 9>;

M3d skew(double x, double y, double z) { return {0, -z, y, z, 0, -x, -y, x, 0}; }

M3d mmul(const M3d& a, const M3d& b) {
  M3d r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[3 * i + j] = a[3 * i] * b[j] + a[3 * i + 1] * b[3 + j] + a[3 * i + 2] * b[6 + j];
  }
  return r;
}

M3d rodrigues_d(double x, double y, double z) {
  const double theta2 = x * x + y * y + z * z;
  const double theta = std::sqrt(theta2);
  const M3d k = skew(x, y, z);
  const M3d k2 = mmul(k, k);
  double a, b;
  if (theta < kSmallAngle) {
    a = 1.0;
    b = 0.5;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  M3d r{};
  for (int i = 0; i < 9; ++i) r[i] = (i % 4 == 0 ? 1.0 : 0.0) + a * k[i] + b * k2[i];
  return r;
}

}  // namespace

Mat3 rodrigues(std::span<const float, 3> w) {
  const M3d r = rodrigues_d(w[0], w[1], w[2]);
  Mat3 out;
  for (int i = 0; i < 9; ++i) out[i] = static_cast<float>(r[i]);
  return out;
}

Vec3 rodrigues_backward(std::span<const float, 3> w, const Mat3& grad_r) {
  const double v[3] = {w[0], w[1], w[2]};
  const double theta2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
  const M3d kw = skew(v[0], v[1], v[2]);
  Vec3 out{};
  for (int i = 0; i < 3; ++i) {
    const M3d ei = skew(i == 0, i == 1, i == 2);
    M3d dr;
    if (std::sqrt(theta2) < kSmallAngle) {
      // d/dw_i of I + K + K^2 / 2
      const M3d a = mmul(ei, kw), b = mmul(kw, ei);
      for (int k = 0; k < 9; ++k) dr[k] = ei[k] + 0.5 * (a[k] + b[k]);
    } else {
      // dR/dw_i = (w_i [w]x + [w x (I - R) e_i]x) R / |w|^2
      const M3d r = rodrigues_d(v[0], v[1], v[2]);
      double col[3];
      for (int k = 0; k < 3; ++k) col[k] = (k == i ? 1.0 : 0.0) - r[3 * k + i];
      const double c[3] = {v[1] * col[2] - v[2] * col[1], v[2] * col[0] - v[0] * col[2], v[0] * col[1] - v[1] * col[0]};
      const M3d s = skew(c[0], c[1], c[2]);
      M3d t;
      for (int k = 0; k < 9; ++k) t[k] = v[i] * kw[k] + s[k];
      dr = mmul(t, r);
      for (double& x : dr) x /= theta2;
    }
    double acc = 0.0;
    for (int k = 0; k < 9; ++k) acc += dr[k] * grad_r[k];
    out[i] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace fsb::body
