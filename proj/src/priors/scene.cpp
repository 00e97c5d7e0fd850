#include "fsb/priors/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/bodymodel/pose_sampler.hpp"
#include "fsb/error.hpp"
#include "detail/json_fields.hpp"

namespace fsb::priors {
namespace {

using nlohmann::json;
using fsb::detail::field;
using fsb::detail::reject_unknown;

// Palette indexed by joint, for the splat renderer.
std::array<float, 3> joint_color(std::size_t j) {
  const float h = static_cast<float>(j) / static_cast<float>(body::kNumJoints);
  return {0.5f + 0.45f * std::cos(6.2831853f * h), 0.5f + 0.45f * std::cos(6.2831853f * (h + 0.33f)),
          0.5f + 0.45f * std::cos(6.2831853f * (h + 0.67f))};
}

}  // namespace

std::string scene_to_json(const Scene& s) {
  json j;
  j["image"] = {{"width", s.image.width}, {"height", s.image.height}};
  j["camera"] = {{"fx", s.camera.fx}, {"fy", s.camera.fy}, {"cx", s.camera.cx}, {"cy", s.camera.cy}};
  j["pose"] = s.pose.values;
  j["translation"] = s.translation;
  return j.dump();
}

Scene scene_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene: invalid JSON: ") + e.what());
  }
  reject_unknown(j, {"image", "camera", "pose", "translation"}, "scene");
  Scene s;
  const json& img = j.at("image");
  reject_unknown(img, {"width", "height"}, "scene.image");
  s.image.width = field<int>(img, "width", "scene.image");
  s.image.height = field<int>(img, "height", "scene.image");
  if (s.image.width < 2 || s.image.height < 2) throw ConfigError("scene.image: width and height must be at least 2");
  const json& cam = j.at("camera");
  reject_unknown(cam, {"fx", "fy", "cx", "cy"}, "scene.camera");
  s.camera.fx = field<float>(cam, "fx", "scene.camera");
  s.camera.fy = field<float>(cam, "fy", "scene.camera");
  s.camera.cx = field<float>(cam, "cx", "scene.camera");
  s.camera.cy = field<float>(cam, "cy", "scene.camera");
  s.camera.validate();
  const auto pose = field<std::vector<float>>(j, "pose", "scene");
  if (pose.size() != body::kPoseDim) throw ConfigError("scene.pose: expected 76 values");
  std::copy(pose.begin(), pose.end(), s.pose.values.begin());
  const auto tr = field<std::vector<float>>(j, "translation", "scene");
  if (tr.size() != 3) throw ConfigError("scene.translation: expected 3 values");
  std::copy(tr.begin(), tr.end(), s.translation.begin());
  if (!(s.translation[2] > 0.0f)) throw ConfigError("scene.translation: person must be in front of the camera");
  return s;
}

void save_scene(const std::filesystem::path& path, const Scene& s) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << scene_to_json(s) << '\n';
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return scene_from_json(ss.str());
}

Scene random_scene(std::uint64_t seed, ImageSize image) {
  Scene s;
  s.image = image;
  const float f = 300.0f * static_cast<float>(std::min(image.width, image.height)) / 256.0f;
  s.camera = {.fx = f,
              .fy = f,
              .cx = 0.5f * static_cast<float>(image.width - 1),
              .cy = 0.5f * static_cast<float>(image.height - 1)};
  body::PosePrior prior;
  prior.global_sigma = 0.15f;
  prior.zero_hands = false;
  s.pose = body::sample_pose(seed, prior);
  std::mt19937_64 rng(seed ^ 0x5ce9e5ull);
  std::uniform_real_distribution<float> dx(-0.15f, 0.15f), dy(-0.1f, 0.1f), dz(2.8f, 3.3f);
  s.translation = {dx(rng), dy(rng), dz(rng)};
  return s;
}

numkit::Array camera_joints(const Scene& s, const body::BodyTemplate& t) {
  const body::FkResult fk = body::forward_kinematics(t, s.pose);
  numkit::Array out({body::kNumJoints, 3});
  for (std::size_t j = 0; j < body::kNumJoints; ++j) {
    for (std::size_t d = 0; d < 3; ++d) out.mutable_data()[3 * j + d] = fk.joints[j][d] + s.translation[d];
  }
  return out;
}

numkit::Array ground_truth_keypoints(const Scene& s, const body::BodyTemplate& t) {
  return body::project(s.camera, camera_joints(s, t));
}

void detect_stub(const Scene& s, const body::BodyTemplate& t, float noise_sigma, std::uint64_t seed, Detection& out) {
  const body::FkResult fk = body::forward_kinematics(t, s.pose);
  std::array<float, 3 * body::kNumJoints> cam{};
  for (std::size_t j = 0; j < body::kNumJoints; ++j) {
    for (std::size_t d = 0; d < 3; ++d) cam[3 * j + d] = fk.joints[j][d] + s.translation[d];
  }
  std::array<float, 2 * body::kNumJoints> xy{};
  body::project(s.camera, cam, xy);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (std::size_t j = 0; j < body::kNumJoints; ++j) {
    if (noise_sigma > 0.0f) {
      xy[2 * j] += noise_sigma * n(rng);
      xy[2 * j + 1] += noise_sigma * n(rng);
    }
    out.keypoints[j] = {xy[2 * j], xy[2 * j + 1], 1.0f};
  }
  out.body_box = box_from_points(xy, kBodyBoxPad, s.image);
}

Detection detect_stub(const Scene& s, const body::BodyTemplate& t, float noise_sigma, std::uint64_t seed) {
  Detection d;
  detect_stub(s, t, noise_sigma, seed, d);
  return d;
}

float background_value(int x, int y, int c, ImageSize image) {
  const float u = static_cast<float>(x) / static_cast<float>(image.width - 1);
  const float v = static_cast<float>(y) / static_cast<float>(image.height - 1);
  switch (c) {
    case 0: return 0.15f + 0.25f * u;
    case 1: return 0.20f + 0.25f * v;
    default: return 0.35f + 0.1f * u * v;
  }
}

numkit::Array render_scene(const Scene& s, const body::BodyTemplate& t) {
  const int w = s.image.width, h = s.image.height;
  numkit::Array img({static_cast<std::size_t>(h), static_cast<std::size_t>(w), 3});
  auto px = img.mutable_data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y) * w + x) * 3 + c] = background_value(x, y, c, s.image);
    }
  }
  numkit::Array verts = body::skin(t, s.pose);
  for (std::size_t v = 0; v < t.num_vertices(); ++v) {
    for (std::size_t d = 0; d < 3; ++d) verts.mutable_data()[3 * v + d] += s.translation[d];
  }
  const numkit::Array uv = body::project(s.camera, verts);
  constexpr int kRadius = 3;
  constexpr float kSigma = 1.2f;
  for (std::size_t v = 0; v < t.num_vertices(); ++v) {
    std::size_t dominant = 0;
    for (std::size_t j = 1; j < body::kNumJoints; ++j) {
      if (t.skin_weights.at(v, j) > t.skin_weights.at(v, dominant)) dominant = j;
    }
    const auto col = joint_color(dominant);
    const float cx = uv.at(v, 0), cy = uv.at(v, 1);
    const int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
    for (int y = y0 - kRadius; y <= y0 + kRadius; ++y) {
      if (y < 0 || y >= h) continue;
      for (int x = x0 - kRadius; x <= x0 + kRadius; ++x) {
        if (x < 0 || x >= w) continue;
        const float dx = static_cast<float>(x) - cx, dy = static_cast<float>(y) - cy;
        const float a = 0.8f * std::exp(-(dx * dx + dy * dy) / (2.0f * kSigma * kSigma));
        float* p = &px[(static_cast<std::size_t>(y) * w + x) * 3];
        for (int c = 0; c < 3; ++c) p[c] = p[c] * (1.0f - a) + col[c] * a;
      }
    }
  }
  return img;
}

BBox foreground_box(const numkit::Array& image, ImageSize size, float pad) {
  if (image.shape() != numkit::Shape{static_cast<std::size_t>(size.height), static_cast<std::size_t>(size.width), 3}) {
    throw ShapeError("foreground_box: image shape does not match its declared size");
  }
  int x0 = size.width, y0 = size.height, x1 = -1, y1 = -1;
  const auto px = image.data();
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      float diff = 0.0f;
      for (int c = 0; c < 3; ++c) {
        diff = std::max(diff, std::fabs(px[(static_cast<std::size_t>(y) * size.width + x) * 3 + c] - background_value(x, y, c, size)));
      }
      if (diff > 0.05f) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) return {0.0f, 0.0f, static_cast<float>(size.width - 1), static_cast<float>(size.height - 1)};
  const float pts[4] = {static_cast<float>(x0), static_cast<float>(y0), static_cast<float>(x1), static_cast<float>(y1)};
  return box_from_points(pts, pad, size);
}

}  // namespace fsb::priors
