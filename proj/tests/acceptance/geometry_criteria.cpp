// Randomized property suites, at least 100 cases each.

#include <cmath>
#include <sstream>

#include "criteria.hpp"
#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/bodymodel/pose_sampler.hpp"
#include "fsb/bodymodel/toy_models.hpp"
#include "fsb/projection/bridge.hpp"
#include "fsb/projection/fit.hpp"
#include "fsb/projection/projector.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace fsb::acceptance {
namespace {

using namespace fsb::projection;

const body::ToyModels& models() {
  static const body::ToyModels m = body::make_toy_models(7);
  return m;
}

const Bridge& bridge() {
  static const Bridge b(precompute_bary(models().mhr, models().smpl).map, models().mhr);
  return b;
}

std::vector<float> source_mesh(std::uint64_t seed) {
  const body::PoseState p = body::sample_pose(seed);
  std::vector<float> v(3 * models().mhr.num_vertices());
  body::skin(models().mhr, p, body::forward_kinematics(models().mhr, p), kFitSkin, v);
  return v;
}

struct Suite {
  explicit Suite(std::string n) : name(std::move(n)) {}

  std::string name;
  int cases = 0, passed = 0;
  std::string note;

  void add(bool ok) {
    ++cases;
    passed += ok ? 1 : 0;
  }
  bool pass() const { return cases >= 100 && passed == cases; }
};

Suite bary_rows() {
  Suite s{"bary rows"};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(-1.2f, 1.2f);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    body::BodyTemplate targets;
    std::vector<float> pts(3 * 8);
    for (float& v : pts) v = u(rng);
    targets.vertices_rest = numkit::Array({8, 3}, pts);
    const BaryResult r = precompute_bary(models().mhr, targets);
    bool ok = true;
    try {
      validate_bary(r.map, models().mhr.faces.size());
    } catch (const std::exception&) {
      ok = false;
    }
    for (std::size_t v = 0; v < r.map.size(); ++v) {
      double sum = 0.0;
      for (int c = 0; c < 3; ++c) {
        ok = ok && r.map.weights.at(v, c) >= 0.0f;
        sum += r.map.weights.at(v, c);
      }
      worst = std::max(worst, std::fabs(sum - 1.0));
      ok = ok && std::fabs(sum - 1.0) <= 1e-6;
    }
    s.add(ok);
  }
  std::ostringstream n;
  n << "max |row sum - 1| " << worst;
  s.note = n.str();
  return s;
}

Suite bridge_linearity() {
  Suite s{"bridge linearity"};
  const Bridge& b = bridge();
  const std::size_t ns = 3 * b.source_vertices(), nt = 3 * b.target_vertices();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<float> coef(-2.0f, 2.0f);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = testing::random_array({ns}, 100 + trial), w = testing::random_array({ns}, 300 + trial);
    const float a = coef(rng), c = coef(rng);
    std::vector<float> mix(ns), bu(nt), bw(nt), bmix(nt);
    for (std::size_t i = 0; i < ns; ++i) mix[i] = a * u.data()[i] + c * w.data()[i];
    b.apply(u.data(), bu);
    b.apply(w.data(), bw);
    b.apply(mix, bmix);
    double d = 0.0;
    for (std::size_t i = 0; i < nt; ++i) d = std::max(d, static_cast<double>(std::fabs(bmix[i] - (a * bu[i] + c * bw[i]))));
    worst = std::max(worst, d);
    s.add(d <= 1e-5);
  }
  std::ostringstream n;
  n << "max deviation " << worst;
  s.note = n.str();
  return s;
}

// Bit-exact where every coordinate and offset is representable (2^-16 grid,
// offsets multiples of 2^-10); within 1e-4 for arbitrary float offsets.
Suite translation_invariance() {
  Suite s{"projector translation invariance"};
  Projector p(bridge(), ProjectorWeights::random(bridge().target_vertices(), 9));
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> step(-2048, 2048);
  for (int trial = 0; trial < 100; ++trial) {
    auto mesh = source_mesh(500 + trial);
    for (float& v : mesh) v = std::ldexp(std::round(std::ldexp(v, 16)), -16);
    std::array<float, 3> t{};
    for (float& x : t) x = std::ldexp(static_cast<float>(step(rng)), -10);
    auto moved = mesh;
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += t[i % 3];
    s.add(p.forward(mesh).values == p.forward(moved).values);
  }
  std::uniform_real_distribution<float> off(-3.0f, 3.0f);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto mesh = source_mesh(700 + trial);
    auto moved = mesh;
    const std::array<float, 3> t{off(rng), off(rng), off(rng)};
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += t[i % 3];
    const body::PoseState a = p.forward(mesh), c = p.forward(moved);
    double d = 0.0;
    for (std::size_t k = 0; k < body::kPoseDim; ++k) d = std::max(d, static_cast<double>(std::fabs(a.values[k] - c.values[k])));
    worst = std::max(worst, d);
    s.add(d <= 1e-4);
  }
  std::ostringstream n;
  n << "100 grid-aligned bit-exact, 100 arbitrary within " << worst;
  s.note = n.str();
  return s;
}

Suite skin_weight_rows() {
  Suite s{"skin-weight rows"};
  std::size_t rows = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const body::ToyModels m = body::make_toy_models(1000 + seed);
    bool ok = true;
    for (const body::BodyTemplate* t : {&m.mhr, &m.smpl}) {
      for (std::size_t v = 0; v < t->num_vertices(); ++v) {
        float sum = 0.0f;
        for (std::size_t j = 0; j < t->num_joints(); ++j) {
          ok = ok && t->skin_weights.at(v, j) >= 0.0f;
          sum += t->skin_weights.at(v, j);
        }
        ok = ok && sum == 1.0f;
        ++rows;
      }
    }
    s.add(ok);
  }
  s.note = std::to_string(rows) + " rows sum to exactly 1 in float";
  return s;
}

// Pre-rotating the root by R moves every joint by R about the pelvis.
Suite fk_rigid() {
  Suite s{"FK rigid composition"};
  const body::BodyTemplate& t = models().mhr;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const body::PoseState p = testing::random_pose(900 + seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const auto rg = oracle::axis_angle(n(rng), n(rng), n(rng));
    const auto w = oracle::log_rotation(rg * oracle::axis_angle(p.values[0], p.values[1], p.values[2]));
    body::PoseState q = p;
    for (int i = 0; i < 3; ++i) q.values[i] = static_cast<float>(w[i]);
    const body::FkResult a = body::forward_kinematics(t, p), b = body::forward_kinematics(t, q);
    double d = 0.0;
    for (std::size_t j = 0; j < body::kNumJoints; ++j) {
      const Eigen::Vector3d want = rg * Eigen::Vector3d(a.joints[j][0], a.joints[j][1], a.joints[j][2]);
      for (int k = 0; k < 3; ++k) d = std::max(d, std::fabs(b.joints[j][k] - want[k]));
    }
    worst = std::max(worst, d);
    s.add(d <= 1e-5);
  }
  std::ostringstream n;
  n << "max joint deviation " << worst;
  s.note = n.str();
  return s;
}

}  // namespace

Outcome geometry_invariants() {
  const std::vector<Suite> all = {bary_rows(), bridge_linearity(), translation_invariance(), skin_weight_rows(), fk_rigid()};
  bool pass = true;
  std::ostringstream s;
  for (const Suite& x : all) {
    pass = pass && x.pass();
    s << (&x == &all.front() ? "" : "; ") << x.name << " " << x.passed << "/" << x.cases << " (" << x.note << ")";
  }
  return {pass, s.str()};
}

}  // namespace fsb::acceptance
