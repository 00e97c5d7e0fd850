#pragma once

#include <cstdint>

#include "fsb/bodymodel/template.hpp"

namespace fsb::body {

struct ToySizes {
  std::size_t mhr_vertices = 1200;
  std::size_t smpl_vertices = 600;
  std::size_t correctives = 8;
};

struct ToyModels {
  BodyTemplate mhr;   // dense source topology
  BodyTemplate smpl;  // coarse target topology, vertices placed on mhr faces
  BaryMap ground_truth;
};

// Both templates share the 22-joint tree. Every smpl rest vertex is built as
// apply_bary(ground_truth, mhr faces, mhr rest vertices), and lies at least
// 1e-4 from every mhr face other than its own.
ToyModels make_toy_models(std::uint64_t seed, ToySizes sizes = {});

// Rest joint positions (pelvis at the origin, +y down, +z away from the camera).
const numkit::Array& toy_rest_joints();
const std::vector<int>& toy_parents();

}  // namespace fsb::body
