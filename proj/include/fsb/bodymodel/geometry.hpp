#pragma once

#include <array>
#include <span>

#include "fsb/bodymodel/template.hpp"

namespace fsb::body {

using Vec3d = std::array<double, 3>;

struct TrianglePoint {
  double dist2 = 0.0;
  std::array<double, 3> bary{};  // weights on (a, b, c)
  bool degenerate = false;       // zero-area triangle, resolved on its longest edge
};

// Closest point to p on triangle abc (region tests after Ericson, Real-Time
// Collision Detection 5.1.5), in double precision.
TrianglePoint closest_point_on_triangle(const Vec3d& p, const Vec3d& a, const Vec3d& b, const Vec3d& c);

// out[t] = (w0 * V[f0] + w1 * V[f1]) + w2 * V[f2] per coordinate, where f is
// source face map.face[t]. V is N_src x 3, out is N_t x 3.
void apply_bary(const BaryMap& map, std::span<const Face> source_faces, std::span<const float> source_vertices,
                std::span<float> out);

}  // namespace fsb::body
