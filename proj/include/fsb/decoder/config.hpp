#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fsb::decoder {

struct ModelConfig {
  std::size_t crop_size = 64;
  std::size_t patch = 8;
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t mlp_hidden = 128;
  std::size_t encoder_layers = 1;
  std::size_t body_layers = 5;
  std::size_t hand_layers = 5;
  std::size_t prompt_tokens = 4;
  std::size_t hand_tokens = 2;
  // Output residual scale relative to the mean parameters.
  float head_scale = 0.02f;

  std::size_t grid() const { return crop_size / patch; }
  std::size_t feature_tokens() const { return grid() * grid(); }
  std::size_t patch_values() const { return patch * patch * 3; }

  // ShapeError if the crop is not a whole number of patches; ConfigError otherwise.
  void validate() const;
};

// Set of decoder layers after which the intermediate prediction runs.
class LayerSelection {
 public:
  static constexpr std::size_t kMaxLayers = 32;

  LayerSelection() = default;
  LayerSelection(std::initializer_list<std::size_t> layers) { for (auto l : layers) insert(l); }
  explicit LayerSelection(std::span<const std::size_t> layers) { for (auto l : layers) insert(l); }

  static LayerSelection full(std::size_t num_layers);
  static LayerSelection none() { return {}; }

  void insert(std::size_t layer);
  bool contains(std::size_t layer) const { return layer < kMaxLayers && (mask_ >> layer) & 1u; }
  std::size_t size() const;
  bool empty() const { return mask_ == 0; }
  // Largest element + 1 (0 when empty).
  std::size_t bound() const;
  // UsageError when any element is >= num_layers.
  void validate(std::size_t num_layers) const;
  std::vector<std::size_t> layers() const;
  std::string to_string() const;

  bool operator==(const LayerSelection&) const = default;

 private:
  std::uint32_t mask_ = 0;
};

}  // namespace fsb::decoder
