#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace fsb::body {

inline constexpr std::size_t kNumJoints = 22;
inline constexpr std::size_t kShapeDim = 10;
inline constexpr std::size_t kBodyPoseDim = 3 * (kNumJoints - 1);   // 63
inline constexpr std::size_t kPoseDim = 3 + kBodyPoseDim + kShapeDim;  // 76
inline constexpr std::size_t kShapeOffset = 3 + kBodyPoseDim;

// Joint schema shared by both toy topologies.
inline constexpr std::size_t kPelvis = 0;
inline constexpr std::size_t kLeftWrist = 18;
inline constexpr std::size_t kRightWrist = 19;
inline constexpr std::size_t kLeftHand = 20;   // wrist child, owned by the hand decoder
inline constexpr std::size_t kRightHand = 21;

// Offset of joint j's axis-angle triple inside the flat parameter vector.
// Joint 0 is the global orientation.
constexpr std::size_t rotation_offset(std::size_t joint) { return joint == 0 ? 0 : 3 + 3 * (joint - 1); }

// Flat parameter vector: global_orient(3) | body_pose(63, joints 1..21) | shape(10).
struct PoseState {
  std::array<float, kPoseDim> values{};

  std::span<float, 3> global_orient() { return std::span<float, 3>(values.data(), 3); }
  std::span<const float, 3> global_orient() const { return std::span<const float, 3>(values.data(), 3); }
  std::span<float, kBodyPoseDim> body_pose() { return std::span<float, kBodyPoseDim>(values.data() + 3, kBodyPoseDim); }
  std::span<const float, kBodyPoseDim> body_pose() const {
    return std::span<const float, kBodyPoseDim>(values.data() + 3, kBodyPoseDim);
  }
  std::span<float, kShapeDim> shape() { return std::span<float, kShapeDim>(values.data() + kShapeOffset, kShapeDim); }
  std::span<const float, kShapeDim> shape() const {
    return std::span<const float, kShapeDim>(values.data() + kShapeOffset, kShapeDim);
  }
  std::span<float, 3> rotation(std::size_t joint) {
    return std::span<float, 3>(values.data() + rotation_offset(joint), 3);
  }
  std::span<const float, 3> rotation(std::size_t joint) const {
    return std::span<const float, 3>(values.data() + rotation_offset(joint), 3);
  }

  bool operator==(const PoseState&) const = default;
};

}  // namespace fsb::body
