#include "fsb/bodymodel/kinematics.hpp"

#include <cmath>
#include <string>

#include "fsb/bodymodel/rotation.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/parallel.hpp"

namespace fsb::body {
namespace {

void require_joint_count(const BodyTemplate& t) {
  if (t.num_joints() != kNumJoints) {
    throw ShapeError("template has " + std::to_string(t.num_joints()) + " joints, pose expects " +
                     std::to_string(kNumJoints));
  }
}

Vec3 rest_joint(const BodyTemplate& t, std::size_t j) {
  const float* p = t.joints_rest.data().data() + 3 * j;
  return {p[0], p[1], p[2]};
}

float corrective_coeff(const PoseState& pose, std::uint32_t joint) {
  const auto w = pose.rotation(joint);
  return (w[0] * w[0] + w[1] * w[1]) + w[2] * w[2];
}

// Shaped (and optionally corrected) rest position of vertex v.
Vec3 shaped_vertex(const BodyTemplate& t, const PoseState& pose, bool correctives, std::span<const float> coeffs,
                   std::size_t v) {
  const float* rest = t.vertices_rest.data().data() + 3 * v;
  const float* basis = t.shape_basis.data().data() + v * 3 * kShapeDim;
  const auto beta = pose.shape();
  Vec3 s{rest[0], rest[1], rest[2]};
  for (std::size_t d = 0; d < 3; ++d) {
    for (std::size_t k = 0; k < kShapeDim; ++k) s[d] += basis[d * kShapeDim + k] * beta[k];
  }
  if (correctives) {
    const std::size_t nc = t.num_correctives();
    const float* cb = t.correctives.data().data() + v * 3 * nc;
    for (std::size_t d = 0; d < 3; ++d) {
      for (std::size_t k = 0; k < nc; ++k) s[d] += cb[d * nc + k] * coeffs[k];
    }
  }
  return s;
}

using Blend = std::array<float, 12>;  // 3x4 row-major [R | a]

template <typename F>
void for_each_weight(const BodyTemplate& t, bool sparse, std::size_t v, F&& f) {
  if (sparse) {
    for (std::uint32_t i = t.sparse.offsets[v]; i < t.sparse.offsets[v + 1]; ++i) f(t.sparse.joints[i], t.sparse.weights[i]);
    return;
  }
  const std::size_t nj = t.num_joints();
  const float* row = t.skin_weights.data().data() + v * nj;
  for (std::size_t j = 0; j < nj; ++j) {
    if (row[j] != 0.0f) f(static_cast<std::uint32_t>(j), row[j]);
  }
}

Blend blend(const BodyTemplate& t, const FkResult& fk, bool sparse, std::size_t v) {
  Blend m{};
  for_each_weight(t, sparse, v, [&](std::uint32_t j, float w) {
    const Mat3& r = fk.rotation[j];
    const Vec3& a = fk.offset[j];
    for (int row = 0; row < 3; ++row) {
      m[4 * row + 0] += w * r[3 * row + 0];
      m[4 * row + 1] += w * r[3 * row + 1];
      m[4 * row + 2] += w * r[3 * row + 2];
      m[4 * row + 3] += w * a[row];
    }
  });
  return m;
}

}  // namespace

FkResult forward_kinematics(const BodyTemplate& t, const PoseState& pose) {
  require_joint_count(t);
  FkResult fk;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    fk.local[j] = rodrigues(pose.rotation(j));
    const Vec3 jr = rest_joint(t, j);
    const Vec3 u = sub(jr, mul(fk.local[j], jr));
    const int p = t.parents[j];
    if (p < 0) {
      fk.rotation[j] = fk.local[j];
      fk.offset[j] = u;
    } else {
      fk.rotation[j] = mul(fk.rotation[p], fk.local[j]);
      fk.offset[j] = add(fk.offset[p], mul(fk.rotation[p], u));
    }
    fk.joints[j] = add(mul(fk.rotation[j], jr), fk.offset[j]);
  }
  return fk;
}

void forward_kinematics_backward(const BodyTemplate& t, const PoseState& pose, const FkResult& fk, FkGrad& g,
                                 std::span<float, kPoseDim> grad_pose) {
  require_joint_count(t);
  for (std::size_t j = kNumJoints; j-- > 0;) {
    const Vec3 jr = rest_joint(t, j);
    // joints[j] = rotation[j] * jr + offset[j]
    add_to(g.rotation[j], outer(g.joints[j], jr));
    add_to(g.offset[j], g.joints[j]);

    const int p = t.parents[j];
    Mat3 d_local;
    if (p < 0) {
      // rotation = local, offset = jr - local * jr
      d_local = g.rotation[j];
      const Mat3 o = outer(g.offset[j], jr);
      for (int i = 0; i < 9; ++i) d_local[i] -= o[i];
    } else {
      const Mat3& rp = fk.rotation[p];
      const Vec3 u = sub(jr, mul(fk.local[j], jr));
      // rotation = rp * local, offset = offset_p + rp * (jr - local * jr)
      d_local = mul(transpose(rp), g.rotation[j]);
      const Mat3 o = outer(mul_t(rp, g.offset[j]), jr);
      for (int i = 0; i < 9; ++i) d_local[i] -= o[i];
      add_to(g.rotation[p], mul(g.rotation[j], transpose(fk.local[j])));
      add_to(g.rotation[p], outer(g.offset[j], u));
      add_to(g.offset[p], g.offset[j]);
    }
    const Vec3 dw = rodrigues_backward(pose.rotation(j), d_local);
    const std::size_t off = rotation_offset(j);
    for (int i = 0; i < 3; ++i) grad_pose[off + i] += dw[i];
  }
}

void skin(const BodyTemplate& t, const PoseState& pose, const FkResult& fk, SkinOptions opt, std::span<float> out) {
  require_joint_count(t);
  const std::size_t nv = t.num_vertices();
  if (out.size() != nv * 3) throw ShapeError("skin: output buffer must hold N_v x 3 values");
  const bool correct = opt.correctives && t.num_correctives() > 0;
  std::array<float, 64> coeffs{};
  if (correct) {
    if (t.num_correctives() > coeffs.size()) throw ShapeError("skin: too many corrective directions");
    for (std::size_t k = 0; k < t.num_correctives(); ++k) coeffs[k] = corrective_coeff(pose, t.corrective_joints[k]);
  }
  const std::span<const float> cs(coeffs.data(), t.num_correctives());
  numkit::parallel_for(nv, 256, [&](std::size_t v0, std::size_t v1) {
    for (std::size_t v = v0; v < v1; ++v) {
      const Vec3 s = shaped_vertex(t, pose, correct, cs, v);
      const Blend m = blend(t, fk, opt.sparse_weights, v);
      float* o = out.data() + 3 * v;
      for (int r = 0; r < 3; ++r) o[r] = ((m[4 * r] * s[0] + m[4 * r + 1] * s[1]) + m[4 * r + 2] * s[2]) + m[4 * r + 3];
    }
  });
}

numkit::Array skin(const BodyTemplate& t, const PoseState& pose, SkinOptions opt) {
  const FkResult fk = forward_kinematics(t, pose);
  numkit::Array out({t.num_vertices(), 3});
  skin(t, pose, fk, opt, out.mutable_data());
  return out;
}

void skin_backward(const BodyTemplate& t, const PoseState& pose, const FkResult& fk, SkinOptions opt,
                   std::span<const float> grad_vertices, std::span<float, kPoseDim> grad_pose) {
  require_joint_count(t);
  const std::size_t nv = t.num_vertices();
  if (grad_vertices.size() != nv * 3) throw ShapeError("skin_backward: gradient must be N_v x 3");
  const bool correct = opt.correctives && t.num_correctives() > 0;
  const std::size_t nc = correct ? t.num_correctives() : 0;
  std::array<float, 64> coeffs{};
  for (std::size_t k = 0; k < nc; ++k) coeffs[k] = corrective_coeff(pose, t.corrective_joints[k]);
  const std::span<const float> cs(coeffs.data(), nc);

  std::array<std::array<double, 12>, kNumJoints> d_joint{};
  std::array<double, kShapeDim> d_beta{};
  std::array<double, 64> d_coeff{};
  for (std::size_t v = 0; v < nv; ++v) {
    const float* g = grad_vertices.data() + 3 * v;
    if (g[0] == 0.0f && g[1] == 0.0f && g[2] == 0.0f) continue;
    const Vec3 s = shaped_vertex(t, pose, correct, cs, v);
    const Blend m = blend(t, fk, opt.sparse_weights, v);
    // ds = M[:, :3]^T g
    double ds[3];
    for (int c = 0; c < 3; ++c) {
      ds[c] = static_cast<double>(m[c]) * g[0] + static_cast<double>(m[4 + c]) * g[1] + static_cast<double>(m[8 + c]) * g[2];
    }
    for_each_weight(t, opt.sparse_weights, v, [&](std::uint32_t j, float w) {
      auto& dj = d_joint[j];
      for (int r = 0; r < 3; ++r) {
        const double wg = static_cast<double>(w) * g[r];
        dj[4 * r + 0] += wg * s[0];
        dj[4 * r + 1] += wg * s[1];
        dj[4 * r + 2] += wg * s[2];
        dj[4 * r + 3] += wg;
      }
    });
    const float* basis = t.shape_basis.data().data() + v * 3 * kShapeDim;
    for (std::size_t d = 0; d < 3; ++d) {
      for (std::size_t k = 0; k < kShapeDim; ++k) d_beta[k] += basis[d * kShapeDim + k] * ds[d];
    }
    if (correct) {
      const float* cb = t.correctives.data().data() + v * 3 * nc;
      for (std::size_t d = 0; d < 3; ++d) {
        for (std::size_t k = 0; k < nc; ++k) d_coeff[k] += cb[d * nc + k] * ds[d];
      }
    }
  }

  for (std::size_t k = 0; k < kShapeDim; ++k) grad_pose[kShapeOffset + k] += static_cast<float>(d_beta[k]);
  for (std::size_t k = 0; k < nc; ++k) {
    const auto w = pose.rotation(t.corrective_joints[k]);
    const std::size_t off = rotation_offset(t.corrective_joints[k]);
    for (int i = 0; i < 3; ++i) grad_pose[off + i] += static_cast<float>(2.0 * d_coeff[k] * w[i]);
  }

  FkGrad fg;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) fg.rotation[j][3 * r + c] = static_cast<float>(d_joint[j][4 * r + c]);
      fg.offset[j][r] = static_cast<float>(d_joint[j][4 * r + 3]);
    }
  }
  forward_kinematics_backward(t, pose, fk, fg, grad_pose);
}

void project(const CameraIntrinsics& k, std::span<const float> points, std::span<float> out) {
  if (points.size() % 3 != 0 || out.size() != points.size() / 3 * 2) throw ShapeError("project: expected N x 3 -> N x 2");
  const std::size_t n = points.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    const float x = points[3 * i], y = points[3 * i + 1], z = points[3 * i + 2];
    if (!(z > 0.0f)) throw ProjectionError("point " + std::to_string(i) + " has nonpositive depth " + std::to_string(z));
    out[2 * i] = k.fx * (x / z) + k.cx;
    out[2 * i + 1] = k.fy * (y / z) + k.cy;
  }
}

numkit::Array project(const CameraIntrinsics& k, const numkit::Array& points) {
  if (points.rank() != 2 || points.dim(1) != 3) throw ShapeError("project: points must be N x 3");
  numkit::Array out({points.dim(0), 2});
  project(k, points.data(), out.mutable_data());
  return out;
}

}  // namespace fsb::body
