#include "fsb/bodymodel/pose_sampler.hpp"

#include <random>

namespace fsb::body {

PoseState sample_pose(std::uint64_t seed, const PosePrior& prior) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  PoseState p;
  for (std::size_t i = 0; i < 3; ++i) p.values[i] = prior.global_sigma * n(rng);
  for (std::size_t i = 3; i < kShapeOffset; ++i) p.values[i] = prior.body_sigma * n(rng);
  for (std::size_t i = kShapeOffset; i < kPoseDim; ++i) p.values[i] = prior.shape_sigma * n(rng);
  if (prior.zero_hands) zero_hand_slots(p);
  return p;
}

void zero_hand_slots(PoseState& p) {
  for (std::size_t j : {kLeftHand, kRightHand}) {
    for (float& v : p.rotation(j)) v = 0.0f;
  }
}

}  // namespace fsb::body
