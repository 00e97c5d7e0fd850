#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fsb/bodymodel/geometry.hpp"
#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/bodymodel/rotation.hpp"
#include "fsb/bodymodel/toy_models.hpp"
#include "fsb/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fsb;
using namespace fsb::body;
using fsb::testing::random_pose;
using fsb::testing::rel_err;

namespace {

const ToyModels& models() {
  static const ToyModels m = make_toy_models(7);
  return m;
}

}  // namespace

TEST_CASE("rodrigues matches angle-axis and its derivative matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n(0.0f, seed < 2 ? 1e-8f : 0.8f);
    const std::array<float, 3> w = {n(rng), n(rng), n(rng)};
    const Mat3 r = rodrigues(w);
    const auto ref = oracle::axis_angle(w[0], w[1], w[2]);
    for (int i = 0; i < 9; ++i) CHECK(std::fabs(r[i] - ref(i / 3, i % 3)) <= 1e-6);

    Mat3 g;
    for (float& x : g) x = n(rng) + 0.3f;
    const Vec3 got = rodrigues_backward(w, g);
    for (int i = 0; i < 3; ++i) {
      auto f = [&](double h) {
        const auto m = oracle::axis_angle(w[0] + (i == 0) * h, w[1] + (i == 1) * h, w[2] + (i == 2) * h);
        double acc = 0;
        for (int k = 0; k < 9; ++k) acc += m(k / 3, k % 3) * g[k];
        return acc;
      };
      const double fd = (f(1e-3) - f(-1e-3)) / 2e-3;
      CHECK(rel_err(got[i], fd) <= 1e-2);
    }
  }
}

TEST_CASE("forward kinematics") {
  const BodyTemplate& t = models().mhr;
  SUBCASE("rest pose gives rest joints exactly") {
    const FkResult fk = forward_kinematics(t, PoseState{});
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      for (int d = 0; d < 3; ++d) CHECK(fk.joints[j][d] == t.joints_rest.at(j, d));
    }
  }
  SUBCASE("half turn about z rotates everything through the root") {
    PoseState p;
    p.global_orient()[2] = static_cast<float>(M_PI);
    const FkResult fk = forward_kinematics(t, p);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      CHECK(std::fabs(fk.joints[j][0] + t.joints_rest.at(j, 0)) <= 1e-5);
      CHECK(std::fabs(fk.joints[j][1] + t.joints_rest.at(j, 1)) <= 1e-5);
      CHECK(std::fabs(fk.joints[j][2] - t.joints_rest.at(j, 2)) <= 1e-5);
    }
  }
  SUBCASE("random poses match the matrix-chain oracle") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const PoseState p = random_pose(seed);
      const FkResult fk = forward_kinematics(t, p);
      const auto ref = oracle::fk_chain(t, oracle::to_vec(p));
      for (std::size_t j = 0; j < kNumJoints; ++j) {
        for (int d = 0; d < 3; ++d) CHECK(std::fabs(fk.joints[j][d] - ref.joints[j][d]) <= 1e-5);
      }
    }
  }
  SUBCASE("wrong joint count is a shape error") {
    BodyTemplate bad = t;
    bad.parents.pop_back();
    CHECK_THROWS_AS(forward_kinematics(bad, PoseState{}), ShapeError);
  }
}

TEST_CASE("skinning") {
  const BodyTemplate& t = models().mhr;
  SUBCASE("rest pose reproduces rest vertices exactly") {
    CHECK(skin(t, PoseState{}).bit_equal(t.vertices_rest));
    CHECK(skin(t, PoseState{}, {.correctives = true}).bit_equal(t.vertices_rest));
  }
  SUBCASE("shape only adds the basis") {
    PoseState p;
    for (std::size_t k = 0; k < kShapeDim; ++k) p.shape()[k] = 0.3f * static_cast<float>(k) - 1.0f;
    const numkit::Array v = skin(t, p);
    for (std::size_t i = 0; i < t.num_vertices(); ++i) {
      for (std::size_t d = 0; d < 3; ++d) {
        float want = t.vertices_rest.at(i, d);
        for (std::size_t k = 0; k < kShapeDim; ++k) want += t.shape_basis.data()[(i * 3 + d) * kShapeDim + k] * p.shape()[k];
        CHECK(v.at(i, d) == want);
      }
    }
  }
  SUBCASE("random poses match the naive dense per-vertex loop bit for bit") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const PoseState p = random_pose(100 + seed);
      const FkResult fk = forward_kinematics(t, p);
      const numkit::Array got = skin(t, p);
      numkit::Array dense({t.num_vertices(), 3});
      skin(t, p, fk, {.sparse_weights = false}, dense.mutable_data());
      CHECK(got.bit_equal(dense));
      // naive: every joint, zero weights included
      for (std::size_t v = 0; v < t.num_vertices(); ++v) {
        float m[12] = {};
        for (std::size_t j = 0; j < kNumJoints; ++j) {
          const float w = t.skin_weights.at(v, j);
          if (w == 0.0f) continue;
          for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) m[4 * r + c] += w * fk.rotation[j][3 * r + c];
            m[4 * r + 3] += w * fk.offset[j][r];
          }
        }
        float s[3];
        for (std::size_t d = 0; d < 3; ++d) {
          s[d] = t.vertices_rest.at(v, d);
          for (std::size_t k = 0; k < kShapeDim; ++k) s[d] += t.shape_basis.data()[(v * 3 + d) * kShapeDim + k] * p.shape()[k];
        }
        for (int r = 0; r < 3; ++r) {
          const float o = ((m[4 * r] * s[0] + m[4 * r + 1] * s[1]) + m[4 * r + 2] * s[2]) + m[4 * r + 3];
          CHECK(got.at(v, r) == o);
        }
      }
    }
  }
  SUBCASE("random poses agree with the double-precision oracle") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const PoseState p = random_pose(200 + seed);
      for (bool corr : {false, true}) {
        const numkit::Array got = skin(t, p, {.correctives = corr});
        const auto ref = oracle::skin(t, oracle::to_vec(p), corr);
        double worst = 0;
        for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::fabs(got[i] - ref[i]));
        CHECK(worst <= 1e-5);
      }
    }
  }
  SUBCASE("one-hot weights move vertices rigidly with their joint") {
    BodyTemplate one = t;
    const std::size_t j = 16;
    for (std::size_t v = 0; v < one.num_vertices(); ++v) {
      for (std::size_t k = 0; k < kNumJoints; ++k) one.skin_weights.at_mut(v, k) = k == j ? 1.0f : 0.0f;
    }
    one.finalize();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      PoseState p = random_pose(300 + seed);
      for (float& b : p.shape()) b = 0.0f;
      const FkResult fk = forward_kinematics(one, p);
      const numkit::Array v = skin(one, p);
      for (std::size_t i = 0; i < one.num_vertices(); i += 7) {
        const Vec3 rest = {one.vertices_rest.at(i, 0), one.vertices_rest.at(i, 1), one.vertices_rest.at(i, 2)};
        const Vec3 want = add(mul(fk.rotation[j], rest), fk.offset[j]);
        for (int d = 0; d < 3; ++d) CHECK(std::fabs(v.at(i, d) - want[d]) <= 1e-6);
      }
    }
  }
}

TEST_CASE("skinning gradient matches finite differences of the double oracle") {
  for (const bool corr : {false, true}) {
    const BodyTemplate& t = corr ? models().smpl : models().mhr;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const PoseState p = random_pose(400 + seed, 0.35f, 0.8f);
      const numkit::Array c = fsb::testing::random_array({t.num_vertices(), 3}, 500 + seed);
      const FkResult fk = forward_kinematics(t, p);
      std::array<float, kPoseDim> grad{};
      skin_backward(t, p, fk, {.correctives = corr}, c.data(), grad);
      const auto fd = fsb::testing::central_diff(oracle::to_vec(p), [&](const std::vector<double>& x) {
        const auto v = oracle::skin(t, x, corr);
        double acc = 0;
        for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * c[i];
        return acc;
      });
      double worst = 0;
      for (std::size_t i = 0; i < kPoseDim; ++i) worst = std::max(worst, rel_err(grad[i], fd[i]));
      CHECK(worst <= 1e-2);
    }
  }
}

TEST_CASE("FK gradient through joint outputs") {
  const BodyTemplate& t = models().mhr;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PoseState p = random_pose(600 + seed);
    const FkResult fk = forward_kinematics(t, p);
    const numkit::Array c = fsb::testing::random_array({kNumJoints, 3}, 700 + seed);
    FkGrad g;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      for (int d = 0; d < 3; ++d) g.joints[j][d] = c.at(j, d);
    }
    std::array<float, kPoseDim> grad{};
    forward_kinematics_backward(t, p, fk, g, grad);
    const auto fd = fsb::testing::central_diff(oracle::to_vec(p), [&](const std::vector<double>& x) {
      const auto ch = oracle::fk_chain(t, x);
      double acc = 0;
      for (std::size_t j = 0; j < kNumJoints; ++j) {
        for (int d = 0; d < 3; ++d) acc += ch.joints[j][d] * c.at(j, d);
      }
      return acc;
    });
    double worst = 0;
    for (std::size_t i = 0; i < kPoseDim; ++i) worst = std::max(worst, rel_err(grad[i], fd[i]));
    CHECK(worst <= 1e-2);
  }
}

TEST_CASE("pinhole projection") {
  CameraIntrinsics k{.fx = 400, .fy = 420, .cx = 100, .cy = 80};
  SUBCASE("optical axis maps to principal point") {
    const auto uv = project(k, numkit::Array({2, 3}, {0, 0, 1, 0, 0, 7.5f}));
    CHECK(uv.at(0, 0) == 100.0f);
    CHECK(uv.at(1, 1) == 80.0f);
  }
  SUBCASE("unit offset at unit depth") {
    CameraIntrinsics f{.fx = 300, .fy = 300, .cx = 0, .cy = 0};
    const auto uv = project(f, numkit::Array({1, 3}, {1, 0, 1}));
    CHECK(uv.at(0, 0) == 300.0f);
    CHECK(uv.at(0, 1) == 0.0f);
  }
  SUBCASE("random clouds match the scalar oracle") {
    const auto pts = fsb::testing::random_array({200, 3}, 3, 0.5f, 4.0f);
    const auto uv = project(k, pts);
    for (std::size_t i = 0; i < 200; ++i) {
      const float xn = pts.at(i, 0) / pts.at(i, 2), yn = pts.at(i, 1) / pts.at(i, 2);
      CHECK(std::fabs(uv.at(i, 0) - (k.fx * xn + k.cx)) <= 1e-6);
      CHECK(std::fabs(uv.at(i, 1) - (k.fy * yn + k.cy)) <= 1e-6);
    }
  }
  SUBCASE("nonpositive depth raises") {
    CHECK_THROWS_AS(project(k, numkit::Array({1, 3}, {1, 1, 0})), ProjectionError);
    CHECK_THROWS_AS(project(k, numkit::Array({1, 3}, {1, 1, -2})), ProjectionError);
  }
}

TEST_CASE("toy models") {
  const ToyModels& m = models();
  CHECK(m.mhr.num_vertices() == 1200);
  CHECK(m.smpl.num_vertices() == 600);
  SUBCASE("deterministic in seed") {
    const ToyModels again = make_toy_models(7);
    CHECK(again.mhr.vertices_rest.bit_equal(m.mhr.vertices_rest));
    CHECK(again.mhr.skin_weights.bit_equal(m.mhr.skin_weights));
    CHECK(again.smpl.vertices_rest.bit_equal(m.smpl.vertices_rest));
    CHECK(again.smpl.faces == m.smpl.faces);
    CHECK(again.ground_truth.face == m.ground_truth.face);
    CHECK(!make_toy_models(8).mhr.vertices_rest.bit_equal(m.mhr.vertices_rest));
  }
  SUBCASE("ground-truth map reproduces coarse rest vertices exactly") {
    std::vector<float> out(600 * 3);
    apply_bary(m.ground_truth, m.mhr.faces, m.mhr.vertices_rest.data(), out);
    CHECK(numkit::Array({600, 3}, out).bit_equal(m.smpl.vertices_rest));
  }
  SUBCASE("corresponding vertices stay close under a shared pose") {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const PoseState p = random_pose(800 + seed);
      const auto vm = skin(m.mhr, p);
      const auto vs = skin(m.smpl, p);
      std::vector<float> bridged(600 * 3);
      apply_bary(m.ground_truth, m.mhr.faces, vm.data(), bridged);
      for (std::size_t i = 0; i < 600; ++i) {
        double d2 = 0;
        for (int d = 0; d < 3; ++d) d2 += std::pow(bridged[3 * i + d] - vs.at(i, d), 2);
        worst = std::max(worst, std::sqrt(d2));
      }
    }
    MESSAGE("max coarse/dense correspondence gap: " << worst);
    CHECK(worst <= 0.05);
  }
  SUBCASE("skin weights sum to one exactly in float order") {
    for (const BodyTemplate* t : {&m.mhr, &m.smpl}) {
      for (std::size_t v = 0; v < t->num_vertices(); ++v) {
        float s = 0.0f;
        for (std::size_t j = 0; j < kNumJoints; ++j) s += t->skin_weights.at(v, j);
        CHECK(s == 1.0f);
      }
    }
  }
  SUBCASE("degenerate sizes rejected") {
    CHECK_THROWS_AS(make_toy_models(1, {.mhr_vertices = 500, .smpl_vertices = 600}), UsageError);
    CHECK_THROWS_AS(make_toy_models(1, {.mhr_vertices = 300, .smpl_vertices = 250}), UsageError);
  }
  SUBCASE("template round trip through disk") {
    const auto dir = std::filesystem::temp_directory_path() / "fsb_template_rt";
    std::filesystem::remove_all(dir);
    save_template(dir, m.smpl);
    const BodyTemplate back = load_template(dir);
    CHECK(back.vertices_rest.bit_equal(m.smpl.vertices_rest));
    CHECK(back.correctives.bit_equal(m.smpl.correctives));
    CHECK(back.faces == m.smpl.faces);
    CHECK(back.parents == m.smpl.parents);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("global rotation composes rigidly with FK") {
  const BodyTemplate& t = models().mhr;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    PoseState p = random_pose(900 + seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const auto rg = oracle::axis_angle(n(rng), n(rng), n(rng));
    const auto r0 = oracle::axis_angle(p.values[0], p.values[1], p.values[2]);
    const auto w = oracle::log_rotation(rg * r0);
    PoseState q = p;
    for (int i = 0; i < 3; ++i) q.values[i] = static_cast<float>(w[i]);
    const FkResult a = forward_kinematics(t, p), b = forward_kinematics(t, q);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      const Eigen::Vector3d want = rg * Eigen::Vector3d(a.joints[j][0], a.joints[j][1], a.joints[j][2]);
      for (int d = 0; d < 3; ++d) CHECK(std::fabs(b.joints[j][d] - want[d]) <= 1e-5);
    }
  }
}
