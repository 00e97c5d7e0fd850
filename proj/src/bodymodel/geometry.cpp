#include "fsb/bodymodel/geometry.hpp"

#include <algorithm>
#include <string>

#include "fsb/error.hpp"

namespace fsb::body {
namespace {

Vec3d sub(const Vec3d& a, const Vec3d& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3d& a, const Vec3d& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3d cross(const Vec3d& a, const Vec3d& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dist2_at(const Vec3d& p, const Vec3d& a, const Vec3d& b, const Vec3d& c, const std::array<double, 3>& w) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double q = w[0] * a[i] + w[1] * b[i] + w[2] * c[i] - p[i];
    d += q * q;
  }
  return d;
}

// Closest point on segment xy as a weight on x (1 - s) and y (s).
double segment_param(const Vec3d& p, const Vec3d& x, const Vec3d& y) {
  const Vec3d e = sub(y, x);
  const double len2 = dot(e, e);
  if (len2 == 0.0) return 0.0;
  const double s = dot(sub(p, x), e) / len2;
  return s < 0.0 ? 0.0 : (s > 1.0 ? 1.0 : s);
}

}  // namespace

TrianglePoint closest_point_on_triangle(const Vec3d& p, const Vec3d& a, const Vec3d& b, const Vec3d& c) {
  TrianglePoint r;
  const Vec3d ab = sub(b, a), ac = sub(c, a);
  const Vec3d n = cross(ab, ac);
  const double scale = std::max({dot(ab, ab), dot(ac, ac), dot(sub(c, b), sub(c, b))});
  if (dot(n, n) <= 1e-24 * scale * scale || scale == 0.0) {
    r.degenerate = true;
    const double lab = dot(ab, ab), lac = dot(ac, ac);
    const Vec3d bc = sub(c, b);
    const double lbc = dot(bc, bc);
    if (lab >= lac && lab >= lbc) {
      const double s = segment_param(p, a, b);
      r.bary = {1.0 - s, s, 0.0};
    } else if (lac >= lbc) {
      const double s = segment_param(p, a, c);
      r.bary = {1.0 - s, 0.0, s};
    } else {
      const double s = segment_param(p, b, c);
      r.bary = {0.0, 1.0 - s, s};
    }
    r.dist2 = dist2_at(p, a, b, c, r.bary);
    return r;
  }

  const Vec3d ap = sub(p, a);
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) {
    r.bary = {1, 0, 0};
  } else {
    const Vec3d bp = sub(p, b);
    const double d3 = dot(ab, bp), d4 = dot(ac, bp);
    const Vec3d cp = sub(p, c);
    const double d5 = dot(ab, cp), d6 = dot(ac, cp);
    const double vc = d1 * d4 - d3 * d2;
    const double vb = d5 * d2 - d1 * d6;
    const double va = d3 * d6 - d5 * d4;
    if (d3 >= 0.0 && d4 <= d3) {
      r.bary = {0, 1, 0};
    } else if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
      const double v = d1 / (d1 - d3);
      r.bary = {1.0 - v, v, 0};
    } else if (d6 >= 0.0 && d5 <= d6) {
      r.bary = {0, 0, 1};
    } else if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
      const double w = d2 / (d2 - d6);
      r.bary = {1.0 - w, 0, w};
    } else if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
      const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
      r.bary = {0, 1.0 - w, w};
    } else {
      const double denom = 1.0 / (va + vb + vc);
      const double v = vb * denom, w = vc * denom;
      r.bary = {1.0 - v - w, v, w};
    }
  }
  r.dist2 = dist2_at(p, a, b, c, r.bary);
  return r;
}

void apply_bary(const BaryMap& map, std::span<const Face> faces, std::span<const float> v, std::span<float> out) {
  const std::size_t nt = map.size();
  if (v.size() % 3 != 0) throw ShapeError("bary: source vertex buffer must be N_src x 3");
  if (out.size() != nt * 3) throw ShapeError("bary: output buffer must be N_t x 3");
  if (map.weights.size() != nt * 3) throw ShapeError("bary: weights must be N_t x 3");
  const std::size_t ns = v.size() / 3;
  const float* w = map.weights.data().data();
  for (std::size_t t = 0; t < nt; ++t) {
    if (map.face[t] >= faces.size()) throw ShapeError("bary: face index " + std::to_string(map.face[t]) + " out of range");
    const Face& f = faces[map.face[t]];
    if (f[0] >= ns || f[1] >= ns || f[2] >= ns) throw ShapeError("bary: face refers to a missing source vertex");
    const float* a = v.data() + 3 * f[0];
    const float* b = v.data() + 3 * f[1];
    const float* c = v.data() + 3 * f[2];
    const float* wt = w + 3 * t;
    for (int d = 0; d < 3; ++d) out[3 * t + d] = (wt[0] * a[d] + wt[1] * b[d]) + wt[2] * c[d];
  }
}

}  // namespace fsb::body
