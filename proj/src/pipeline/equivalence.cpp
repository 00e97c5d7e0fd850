#include "fsb/pipeline/equivalence.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

namespace fsb::pipeline {
namespace {

struct Acc {
  float max_abs = 0;
  bool bit_exact = true;

  void add(float a, float b) {
    if (std::bit_cast<std::uint32_t>(a) != std::bit_cast<std::uint32_t>(b)) bit_exact = false;
    const float d = std::fabs(a - b);
    // NaN compares false; treat it as an unbounded difference.
    max_abs = std::isnan(d) ? std::numeric_limits<float>::infinity() : std::max(max_abs, d);
  }
};

bool is_hand_joint(std::size_t j) { return j == body::kLeftHand || j == body::kRightHand; }

}  // namespace

EquivalenceReport check_equivalence(const RunResult& serial, const RunResult& fast, const Tolerances& tol) {
  const body::PoseState& a = serial.merged;
  const body::PoseState& b = fast.merged;
  Acc orient, pose, shape, hands, camera;
  for (std::size_t i = 0; i < 3; ++i) orient.add(a.global_orient()[i], b.global_orient()[i]);
  for (std::size_t j = 1; j < body::kNumJoints; ++j) {
    Acc& acc = is_hand_joint(j) ? hands : pose;
    for (std::size_t i = 0; i < 3; ++i) acc.add(a.rotation(j)[i], b.rotation(j)[i]);
  }
  for (std::size_t i = 0; i < body::kShapeDim; ++i) shape.add(a.shape()[i], b.shape()[i]);
  for (std::size_t i = 0; i < decoder::kCameraDim; ++i) camera.add(serial.body.camera[i], fast.body.camera[i]);

  EquivalenceReport r;
  auto push = [&](const char* name, const Acc& acc, float t) {
    const bool pass = t == 0.0f ? acc.bit_exact : acc.max_abs <= t;
    r.fields.push_back({name, acc.max_abs, t, acc.bit_exact, pass});
    r.pass = r.pass && pass;
    r.max_abs = std::max(r.max_abs, acc.max_abs);
  };
  push("global_orient", orient, tol.global_orient);
  push("body_pose", pose, tol.body_pose);
  push("shape", shape, tol.shape);
  push("hands", hands, tol.hands);
  push("camera", camera, tol.camera);
  return r;
}

std::string EquivalenceReport::to_string() const {
  std::ostringstream s;
  for (const FieldDelta& f : fields) {
    s << f.field << ": max|d|=" << f.max_abs << (f.bit_exact ? " (bit-exact)" : "") << " tol=" << f.tolerance
      << (f.pass ? " ok" : " FAIL") << '\n';
  }
  return s.str();
}

}  // namespace fsb::pipeline
