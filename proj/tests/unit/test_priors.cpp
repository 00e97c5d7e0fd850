#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "fsb/bodymodel/toy_models.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/kernels.hpp"
#include "fsb/priors/boxes.hpp"
#include "fsb/priors/scene.hpp"

using namespace fsb;
using namespace fsb::priors;

namespace {

const body::ToyModels& models() {
  static const body::ToyModels m = body::make_toy_models(7);
  return m;
}

}  // namespace

TEST_CASE("detect_stub: zero noise, determinism, noise statistics") {
  const auto& t = models().mhr;
  const Scene s = random_scene(3);
  const numkit::Array gt = ground_truth_keypoints(s, t);

  const Detection d0 = detect_stub(s, t, 0.0f, 11);
  for (std::size_t j = 0; j < body::kNumJoints; ++j) {
    CHECK(d0.keypoints[j].x == gt.at(j, 0));
    CHECK(d0.keypoints[j].y == gt.at(j, 1));
    CHECK(d0.keypoints[j].confidence == 1.0f);
  }
  CHECK(d0.body_box.valid());

  const Detection a = detect_stub(s, t, 4.0f, 99);
  const Detection b = detect_stub(s, t, 4.0f, 99);
  for (std::size_t j = 0; j < body::kNumJoints; ++j) {
    CHECK(a.keypoints[j].x == b.keypoints[j].x);
    CHECK(a.keypoints[j].y == b.keypoints[j].y);
  }
  CHECK(a.body_box == b.body_box);

  // Per-coordinate sample std over 1000 draws.
  for (std::size_t j : {std::size_t{0}, std::size_t{12}, std::size_t{19}}) {
    for (int axis = 0; axis < 2; ++axis) {
      double sum = 0, sq = 0;
      constexpr int kDraws = 1000;
      for (int k = 0; k < kDraws; ++k) {
        const Detection d = detect_stub(s, t, 4.0f, 1000 + static_cast<std::uint64_t>(k));
        const double e = axis == 0 ? d.keypoints[j].x - gt.at(j, 0) : d.keypoints[j].y - gt.at(j, 1);
        sum += e;
        sq += e * e;
      }
      const double mean = sum / kDraws;
      const double sd = std::sqrt(sq / kDraws - mean * mean);
      CHECK(std::fabs(sd - 4.0) <= 0.4);
    }
  }
}

TEST_CASE("hand_box arithmetic and clamping") {
  const BBox body{0, 0, 300, 400};
  const ImageSize img{1000, 1000};
  const BBox b = hand_box(100, 200, body, 3.0f, img);
  CHECK(b == BBox{50, 150, 150, 250});

  const BBox corner = hand_box(0, 0, body, 3.0f, img);
  CHECK(corner.valid());
  CHECK(corner.x_min == 0.0f);
  CHECK(corner.y_min == 0.0f);
  const BBox far = hand_box(5000, -40, body, 3.0f, img);
  CHECK(far.valid());
  CHECK(far.x_max == 999.0f);

  const BBox unit = hand_box(500, 500, body, 300.0f, img);
  CHECK(unit.width() == doctest::Approx(1.0f));
  CHECK(unit.height() == doctest::Approx(1.0f));
  CHECK(unit.x_min + 0.5f == doctest::Approx(500.0f));

  CHECK_THROWS_AS(hand_box(1, 1, body, 0.0f, img), UsageError);
  CHECK_THROWS_AS(hand_box_unclamped(1, 1, body, -1.0f), UsageError);
}

TEST_CASE("hand_box translation equivariance") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(-200.0f, 200.0f), pos(10.0f, 400.0f), sz(20.0f, 300.0f), al(1.0f, 6.0f);
  for (int k = 0; k < 200; ++k) {
    const float wx = std::round(pos(rng)), wy = std::round(pos(rng));
    const BBox body{std::round(pos(rng)), std::round(pos(rng)), 0, 0};
    BBox b = body;
    b.x_max = b.x_min + std::round(sz(rng));
    b.y_max = b.y_min + std::round(sz(rng));
    const float alpha = al(rng);
    const float dx = std::round(u(rng)), dy = std::round(u(rng));
    const BBox ref = hand_box_unclamped(wx, wy, b, alpha);
    const BBox moved = hand_box_unclamped(wx + dx, wy + dy, {b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy}, alpha);
    CHECK(std::fabs(moved.x_min - (ref.x_min + dx)) <= 1e-4f);
    CHECK(std::fabs(moved.y_min - (ref.y_min + dy)) <= 1e-4f);
    CHECK(std::fabs(moved.x_max - (ref.x_max + dx)) <= 1e-4f);
    CHECK(std::fabs(moved.y_max - (ref.y_max + dy)) <= 1e-4f);
  }
}

TEST_CASE("crop_grid") {
  SUBCASE("full image box is an identity gather") {
    const std::size_t n = 16;
    numkit::Array img({n, n, 3});
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(0, 1);
    for (float& v : img.mutable_data()) v = u(rng);
    const numkit::Array g = crop_grid({0, 0, static_cast<float>(n - 1), static_cast<float>(n - 1)}, n);
    const numkit::Array out = numkit::bilinear_sample(img, g);
    CHECK(out.bit_equal(img));
  }
  SUBCASE("unit box corners") {
    const BBox box{3.0f, 4.0f, 4.0f, 5.0f};
    const numkit::Array g = crop_grid(box, 2);
    CHECK(g.data()[0] == 3.0f);
    CHECK(g.data()[1] == 4.0f);
    CHECK(g.data()[2] == 4.0f);
    CHECK(g.data()[3] == 4.0f);
    CHECK(g.data()[4] == 3.0f);
    CHECK(g.data()[5] == 5.0f);
    CHECK(g.data()[6] == 4.0f);
    CHECK(g.data()[7] == 5.0f);
  }
  SUBCASE("constant image gives constant crop") {
    const numkit::Array img = numkit::Array::full({32, 40, 3}, 0.625f);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<float> u(-10, 50);
    for (int k = 0; k < 20; ++k) {
      float a = u(rng), b = u(rng), c = u(rng), d = u(rng);
      const BBox box{std::min(a, b), std::min(c, d), std::max(a, b) + 0.5f, std::max(c, d) + 0.5f};
      const numkit::Array out = numkit::bilinear_sample(img, crop_grid(box, 9));
      for (float v : out.data()) CHECK(v == 0.625f);
    }
  }
  SUBCASE("uniform spacing, inclusive span") {
    const BBox box{1.5f, -2.0f, 9.5f, 30.0f};
    const numkit::Array g = crop_grid(box, 5);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(g.data()[2 * (i * 5 + j)] == doctest::Approx(1.5 + 2.0 * static_cast<double>(j)));
        CHECK(g.data()[2 * (i * 5 + j) + 1] == doctest::Approx(-2.0 + 8.0 * static_cast<double>(i)));
      }
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(crop_grid({5, 5, 1, 9}, 4), UsageError);
    CHECK_THROWS_AS(crop_grid({0, 0, 1, 1}, 1), UsageError);
  }
}

TEST_CASE("scene JSON round trip and validation") {
  const Scene s = random_scene(21);
  const Scene r = scene_from_json(scene_to_json(s));
  CHECK(r.pose == s.pose);
  CHECK(r.translation == s.translation);
  CHECK(r.camera.fx == s.camera.fx);
  CHECK(r.image.width == s.image.width);

  const auto path = std::filesystem::temp_directory_path() / "fsb_scene_test.json";
  save_scene(path, s);
  CHECK(load_scene(path).pose == s.pose);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(scene_from_json("{"), ConfigError);
  std::string extra = scene_to_json(s);
  extra.insert(1, "\"bogus\":1,");
  CHECK_THROWS_AS(scene_from_json(extra), ConfigError);
  CHECK_THROWS_AS(load_scene("/nonexistent/scene.json"), IoError);
}

TEST_CASE("random scenes keep the person in view") {
  const auto& t = models().mhr;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scene s = random_scene(seed);
    const numkit::Array kp = ground_truth_keypoints(s, t);
    for (std::size_t j = 0; j < body::kNumJoints; ++j) {
      CHECK(kp.at(j, 0) > 0.0f);
      CHECK(kp.at(j, 0) < 255.0f);
      CHECK(kp.at(j, 1) > 0.0f);
      CHECK(kp.at(j, 1) < 255.0f);
    }
  }
}

TEST_CASE("render and foreground box") {
  const auto& t = models().mhr;
  const Scene s = random_scene(4);
  const numkit::Array img = render_scene(s, t);
  CHECK(img.shape() == numkit::Shape{256, 256, 3});
  CHECK(img.bit_equal(render_scene(s, t)));
  const BBox fg = foreground_box(img, s.image);
  CHECK(fg.valid());
  const numkit::Array kp = ground_truth_keypoints(s, t);
  for (std::size_t j = 0; j < body::kNumJoints; ++j) {
    CHECK(kp.at(j, 0) >= fg.x_min);
    CHECK(kp.at(j, 0) <= fg.x_max);
    CHECK(kp.at(j, 1) >= fg.y_min);
    CHECK(kp.at(j, 1) <= fg.y_max);
  }
}
