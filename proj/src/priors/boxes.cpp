#include "fsb/priors/boxes.hpp"

#include <algorithm>
#include <string>

#include "fsb/error.hpp"

namespace fsb::priors {

BBox hand_box_unclamped(float wx, float wy, const BBox& body, float alpha) {
  if (!(alpha > 0.0f)) throw UsageError("hand_box: alpha must be positive");
  const float s = std::min(body.width(), body.height()) / alpha;
  const float h = s / 2.0f;
  return {wx - h, wy - h, wx + h, wy + h};
}

BBox hand_box(float wx, float wy, const BBox& body, float alpha, ImageSize image) {
  const float max_x = static_cast<float>(image.width - 1);
  const float max_y = static_cast<float>(image.height - 1);
  wx = std::clamp(wx, 0.0f, max_x);
  wy = std::clamp(wy, 0.0f, max_y);
  BBox b = hand_box_unclamped(wx, wy, body, alpha);
  b.x_min = std::max(b.x_min, 0.0f);
  b.y_min = std::max(b.y_min, 0.0f);
  b.x_max = std::min(b.x_max, max_x);
  b.y_max = std::min(b.y_max, max_y);
  return b;
}

void crop_grid(const BBox& box, std::size_t n, std::span<float> out) {
  if (n < 2) throw UsageError("crop_grid: out_size must be at least 2");
  if (!box.valid()) throw UsageError("crop_grid: inverted or empty box");
  if (out.size() != n * n * 2) throw ShapeError("crop_grid: output must hold out_size^2 x 2 values");
  const float w = box.width(), h = box.height();
  const auto denom = static_cast<float>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const float y = i + 1 == n ? box.y_max : box.y_min + (h * static_cast<float>(i)) / denom;
    for (std::size_t j = 0; j < n; ++j) {
      const float x = j + 1 == n ? box.x_max : box.x_min + (w * static_cast<float>(j)) / denom;
      out[2 * (i * n + j)] = x;
      out[2 * (i * n + j) + 1] = y;
    }
  }
}

numkit::Array crop_grid(const BBox& box, std::size_t n) {
  if (n < 2) throw UsageError("crop_grid: out_size must be at least 2");
  numkit::Array g({n, n, 2});
  crop_grid(box, n, g.mutable_data());
  return g;
}

BBox box_from_points(std::span<const float> xy, float pad, ImageSize image) {
  if (xy.size() < 4 || xy.size() % 2 != 0) throw ShapeError("box_from_points: need at least two points");
  float x0 = xy[0], x1 = xy[0], y0 = xy[1], y1 = xy[1];
  for (std::size_t i = 2; i < xy.size(); i += 2) {
    x0 = std::min(x0, xy[i]);
    x1 = std::max(x1, xy[i]);
    y0 = std::min(y0, xy[i + 1]);
    y1 = std::max(y1, xy[i + 1]);
  }
  const float cx = 0.5f * (x0 + x1), cy = 0.5f * (y0 + y1);
  const float hw = 0.5f * pad * std::max(x1 - x0, 1.0f), hh = 0.5f * pad * std::max(y1 - y0, 1.0f);
  BBox b{cx - hw, cy - hh, cx + hw, cy + hh};
  b.x_min = std::clamp(b.x_min, 0.0f, static_cast<float>(image.width - 2));
  b.y_min = std::clamp(b.y_min, 0.0f, static_cast<float>(image.height - 2));
  b.x_max = std::clamp(b.x_max, b.x_min + 1.0f, static_cast<float>(image.width - 1));
  b.y_max = std::clamp(b.y_max, b.y_min + 1.0f, static_cast<float>(image.height - 1));
  return b;
}

}  // namespace fsb::priors
