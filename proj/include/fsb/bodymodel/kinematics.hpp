#pragma once

#include <array>
#include <span>

#include "fsb/bodymodel/mat3.hpp"
#include "fsb/bodymodel/pose.hpp"
#include "fsb/bodymodel/template.hpp"

namespace fsb::body {

// Skinning transform of joint j maps a rest-space point p to
// rotation[j] * p + offset[j]; posed joint j is that map applied to the rest joint.
struct FkResult {
  std::array<Mat3, kNumJoints> local{};
  std::array<Mat3, kNumJoints> rotation{};
  std::array<Vec3, kNumJoints> offset{};
  std::array<Vec3, kNumJoints> joints{};
};

FkResult forward_kinematics(const BodyTemplate& t, const PoseState& pose);

// Gradient accumulators with respect to the FK outputs.
struct FkGrad {
  std::array<Mat3, kNumJoints> rotation{};
  std::array<Vec3, kNumJoints> offset{};
  std::array<Vec3, kNumJoints> joints{};
};

// Adds dL/dpose (rotation slots only) given gradients on FK outputs. `grad` is consumed.
void forward_kinematics_backward(const BodyTemplate& t, const PoseState& pose, const FkResult& fk, FkGrad& grad,
                                 std::span<float, kPoseDim> grad_pose);

struct SkinOptions {
  bool correctives = false;
  // Walk the precomputed sparse weight lists instead of scanning dense rows.
  // Both visit the same nonzero weights in the same order, so results match bit for bit.
  bool sparse_weights = true;
};

// Writes N_v x 3 posed vertices into out.
void skin(const BodyTemplate& t, const PoseState& pose, const FkResult& fk, SkinOptions opt, std::span<float> out);
numkit::Array skin(const BodyTemplate& t, const PoseState& pose, SkinOptions opt = {});

// Adds dL/dpose given dL/dvertices (N_v x 3).
void skin_backward(const BodyTemplate& t, const PoseState& pose, const FkResult& fk, SkinOptions opt,
                   std::span<const float> grad_vertices, std::span<float, kPoseDim> grad_pose);

// Pinhole projection of N x 3 points to N x 2 pixels. Throws ProjectionError on z <= 0.
numkit::Array project(const CameraIntrinsics& k, const numkit::Array& points);
void project(const CameraIntrinsics& k, std::span<const float> points, std::span<float> out);

}  // namespace fsb::body
