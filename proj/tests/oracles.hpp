#pragma once

// Double-precision reference implementations built on Eigen. They share no
// code with the library: rotations via AngleAxis, FK as a 4x4 matrix chain,
// skinning as a per-joint weighted sum of transformed points.

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <vector>

#include "fsb/bodymodel/pose.hpp"
#include "fsb/bodymodel/template.hpp"

namespace fsb::oracle {

using Eigen::Matrix3d;
using Eigen::Matrix4d;
using Eigen::Vector3d;

inline Matrix3d axis_angle(double x, double y, double z) {
  const Vector3d w(x, y, z);
  const double n = w.norm();
  if (n == 0.0) return Matrix3d::Identity();
  return Eigen::AngleAxisd(n, w / n).toRotationMatrix();
}

inline Vector3d log_rotation(const Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

// pose: 76 doubles in the library's flat layout.
struct Chain {
  std::vector<Matrix4d> world;  // G_j = G_parent * [R_j | J_j - J_parent]
  std::vector<Vector3d> joints;
};

inline Chain fk_chain(const body::BodyTemplate& t, const std::vector<double>& pose) {
  const std::size_t nj = t.num_joints();
  Chain c;
  c.world.resize(nj);
  c.joints.resize(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    const std::size_t off = body::rotation_offset(j);
    Matrix4d local = Matrix4d::Identity();
    local.topLeftCorner<3, 3>() = axis_angle(pose[off], pose[off + 1], pose[off + 2]);
    const Vector3d jr(t.joints_rest.at(j, 0), t.joints_rest.at(j, 1), t.joints_rest.at(j, 2));
    const int p = t.parents[j];
    if (p < 0) {
      local.topRightCorner<3, 1>() = jr;
      c.world[j] = local;
    } else {
      const Vector3d jp(t.joints_rest.at(p, 0), t.joints_rest.at(p, 1), t.joints_rest.at(p, 2));
      local.topRightCorner<3, 1>() = jr - jp;
      c.world[j] = c.world[p] * local;
    }
    c.joints[j] = c.world[j].topRightCorner<3, 1>();
  }
  return c;
}

inline std::vector<double> skin(const body::BodyTemplate& t, const std::vector<double>& pose, bool correctives) {
  const Chain c = fk_chain(t, pose);
  const std::size_t nv = t.num_vertices(), nj = t.num_joints(), nc = t.num_correctives();
  std::vector<Matrix4d> a(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    Matrix4d back = Matrix4d::Identity();
    back.topRightCorner<3, 1>() = -Vector3d(t.joints_rest.at(j, 0), t.joints_rest.at(j, 1), t.joints_rest.at(j, 2));
    a[j] = c.world[j] * back;
  }
  std::vector<double> coeff(nc);
  for (std::size_t k = 0; k < nc; ++k) {
    const std::size_t off = body::rotation_offset(t.corrective_joints[k]);
    coeff[k] = pose[off] * pose[off] + pose[off + 1] * pose[off + 1] + pose[off + 2] * pose[off + 2];
  }
  std::vector<double> out(3 * nv);
  for (std::size_t v = 0; v < nv; ++v) {
    Eigen::Vector4d s(t.vertices_rest.at(v, 0), t.vertices_rest.at(v, 1), t.vertices_rest.at(v, 2), 1.0);
    for (std::size_t d = 0; d < 3; ++d) {
      for (std::size_t k = 0; k < body::kShapeDim; ++k) {
        s[static_cast<Eigen::Index>(d)] += t.shape_basis.data()[(v * 3 + d) * body::kShapeDim + k] * pose[body::kShapeOffset + k];
      }
      if (correctives) {
        for (std::size_t k = 0; k < nc; ++k) s[static_cast<Eigen::Index>(d)] += t.correctives.data()[(v * 3 + d) * nc + k] * coeff[k];
      }
    }
    Eigen::Vector4d acc = Eigen::Vector4d::Zero();
    for (std::size_t j = 0; j < nj; ++j) acc += t.skin_weights.at(v, j) * (a[j] * s);
    for (int d = 0; d < 3; ++d) out[3 * v + static_cast<std::size_t>(d)] = acc[d];
  }
  return out;
}

inline std::vector<double> to_vec(const body::PoseState& p) { return {p.values.begin(), p.values.end()}; }

}  // namespace fsb::oracle
