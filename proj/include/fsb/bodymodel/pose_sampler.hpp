#pragma once

#include <cstdint>

#include "fsb/bodymodel/pose.hpp"

namespace fsb::body {

struct PosePrior {
  float global_sigma = 0.25f;  // rad, per axis
  float body_sigma = 0.25f;    // rad, per axis
  float shape_sigma = 0.8f;
  bool zero_hands = true;      // wrist-child slots left at zero
};

// Independent Gaussian draw per coordinate, deterministic in seed.
PoseState sample_pose(std::uint64_t seed, const PosePrior& prior = {});

// Zeroes the axis-angle slots of both wrist-child joints.
void zero_hand_slots(PoseState& p);

}  // namespace fsb::body
