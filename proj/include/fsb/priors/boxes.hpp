#pragma once

#include <array>
#include <span>

#include "fsb/bodymodel/pose.hpp"
#include "fsb/numkit/array.hpp"

namespace fsb::priors {

// Pixel coordinates with pixel centers on integers; the full W x H image is
// [0, 0, W - 1, H - 1].
struct BBox {
  float x_min = 0, y_min = 0, x_max = 1, y_max = 1;

  float width() const { return x_max - x_min; }
  float height() const { return y_max - y_min; }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  bool operator==(const BBox&) const = default;
};

struct Keypoint {
  float x = 0, y = 0, confidence = 0;
};
using Keypoints2D = std::array<Keypoint, body::kNumJoints>;

struct ImageSize {
  int width = 256;
  int height = 256;
};

// Square box of side min(w_body, h_body) / alpha centered on the wrist,
// without any image clamping.
BBox hand_box_unclamped(float wrist_x, float wrist_y, const BBox& body, float alpha);

// Same box with the wrist first clamped into the image and the box then
// clipped to it, so the result always has positive area.
BBox hand_box(float wrist_x, float wrist_y, const BBox& body, float alpha, ImageSize image);

// out_size x out_size x 2 grid of (x, y) sample points spanning the box
// inclusively with uniform spacing.
numkit::Array crop_grid(const BBox& box, std::size_t out_size);
void crop_grid(const BBox& box, std::size_t out_size, std::span<float> out);

// Tight box around keypoints, scaled about its center by `pad` and clamped to the image.
BBox box_from_points(std::span<const float> xy, float pad, ImageSize image);

}  // namespace fsb::priors
