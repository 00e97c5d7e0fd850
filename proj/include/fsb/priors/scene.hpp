#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "fsb/bodymodel/pose.hpp"
#include "fsb/bodymodel/template.hpp"
#include "fsb/numkit/array.hpp"
#include "fsb/priors/boxes.hpp"

namespace fsb::priors {

// One person in front of a constant-intrinsics camera.
struct Scene {
  ImageSize image;
  body::CameraIntrinsics camera{.fx = 300, .fy = 300, .cx = 127.5f, .cy = 127.5f};
  body::PoseState pose;
  std::array<float, 3> translation{0.0f, 0.0f, 3.0f};
};

std::string scene_to_json(const Scene& s);
Scene scene_from_json(const std::string& text);  // ConfigError on bad or unknown fields
void save_scene(const std::filesystem::path& path, const Scene& s);
Scene load_scene(const std::filesystem::path& path);

// Deterministic random scene: moderate pose, person roughly centered.
Scene random_scene(std::uint64_t seed, ImageSize image = {});

// Posed joints in camera space (N_j x 3) and their pixel projections (N_j x 2).
numkit::Array camera_joints(const Scene& s, const body::BodyTemplate& t);
numkit::Array ground_truth_keypoints(const Scene& s, const body::BodyTemplate& t);

struct Detection {
  BBox body_box;
  Keypoints2D keypoints;
};

inline constexpr float kBodyBoxPad = 1.25f;

// Stand-in for a 2D pose detector: ground-truth keypoints plus isotropic
// Gaussian noise, and the padded keypoint box.
Detection detect_stub(const Scene& s, const body::BodyTemplate& t, float noise_sigma, std::uint64_t seed);
// Allocation-free form of the same computation.
void detect_stub(const Scene& s, const body::BodyTemplate& t, float noise_sigma, std::uint64_t seed, Detection& out);

// Synthetic H x W x 3 image: smooth background plus Gaussian splats of the
// skinned dense mesh, coloured by dominant joint.
numkit::Array render_scene(const Scene& s, const body::BodyTemplate& t);
float background_value(int x, int y, int c, ImageSize image);

// Box around pixels that differ from the known background.
BBox foreground_box(const numkit::Array& image, ImageSize size, float pad = 1.1f);

}  // namespace fsb::priors
