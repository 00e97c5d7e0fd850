#pragma once

#include <array>

namespace fsb::body {

using Vec3 = std::array<float, 3>;
using Mat3 = std::array<float, 9>;  // row-major

inline constexpr Mat3 kIdentity3 = {1, 0, 0, 0, 1, 0, 0, 0, 1};

inline Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[3 * i + j] = (a[3 * i] * b[j] + a[3 * i + 1] * b[3 + j]) + a[3 * i + 2] * b[6 + j];
  }
  return r;
}

inline Vec3 mul(const Mat3& a, const Vec3& v) {
  return {(a[0] * v[0] + a[1] * v[1]) + a[2] * v[2], (a[3] * v[0] + a[4] * v[1]) + a[5] * v[2],
          (a[6] * v[0] + a[7] * v[1]) + a[8] * v[2]};
}

inline Vec3 mul_t(const Mat3& a, const Vec3& v) {
  return {(a[0] * v[0] + a[3] * v[1]) + a[6] * v[2], (a[1] * v[0] + a[4] * v[1]) + a[7] * v[2],
          (a[2] * v[0] + a[5] * v[1]) + a[8] * v[2]};
}

inline Mat3 transpose(const Mat3& a) { return {a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]}; }

inline Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

// a b^T
inline Mat3 outer(const Vec3& a, const Vec3& b) {
  return {a[0] * b[0], a[0] * b[1], a[0] * b[2], a[1] * b[0], a[1] * b[1],
          a[1] * b[2], a[2] * b[0], a[2] * b[1], a[2] * b[2]};
}

inline void add_to(Mat3& dst, const Mat3& src) {
  for (int i = 0; i < 9; ++i) dst[i] += src[i];
}
inline void add_to(Vec3& dst, const Vec3& src) {
  for (int i = 0; i < 3; ++i) dst[i] += src[i];
}

}  // namespace fsb::body
