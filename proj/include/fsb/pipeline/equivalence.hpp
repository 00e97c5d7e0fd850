#pragma once

#include <string>
#include <vector>

#include "fsb/pipeline/pipeline.hpp"

namespace fsb::pipeline {

// Largest per-field |delta| allowed between the default gated selection and
// every-layer gating, measured on the default frozen weights (peak 0.0088
// over 50 scenes) and frozen with headroom.
inline constexpr float kPruningDriftBound = 0.02f;

// Per-field tolerance: 0 demands bit-identical values.
struct Tolerances {
  float global_orient = 0;
  float body_pose = 0;
  float shape = 0;
  float hands = 0;
  float camera = 0;

  static Tolerances exact() { return {}; }
  static Tolerances uniform(float t) { return {t, t, t, t, t}; }
};

struct FieldDelta {
  std::string field;
  float max_abs = 0;
  float tolerance = 0;
  bool bit_exact = false;
  bool pass = false;
};

struct EquivalenceReport {
  std::vector<FieldDelta> fields;
  bool pass = true;
  float max_abs = 0;

  std::string to_string() const;
};

// Compares merged parameters and body camera field by field.
EquivalenceReport check_equivalence(const RunResult& serial, const RunResult& fast, const Tolerances& tol);

}  // namespace fsb::pipeline
