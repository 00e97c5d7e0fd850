#include "fsb/decoder/config.hpp"

#include <bit>

#include "fsb/error.hpp"

namespace fsb::decoder {

void ModelConfig::validate() const {
  if (patch == 0 || crop_size == 0 || crop_size % patch != 0) {
    throw ShapeError("model config: crop_size must be a positive multiple of patch");
  }
  if (dim == 0 || heads == 0 || dim % heads != 0) throw ConfigError("model config: heads must divide dim");
  if (mlp_hidden == 0) throw ConfigError("model config: mlp_hidden must be positive");
  if (encoder_layers == 0) throw ConfigError("model config: encoder_layers must be positive");
  if (body_layers == 0 || body_layers > LayerSelection::kMaxLayers || hand_layers == 0 ||
      hand_layers > LayerSelection::kMaxLayers) {
    throw ConfigError("model config: decoder layer counts must be in [1, 32]");
  }
  if (!(head_scale >= 0.0f)) throw ConfigError("model config: head_scale must be nonnegative");
}

LayerSelection LayerSelection::full(std::size_t num_layers) {
  if (num_layers > kMaxLayers) throw UsageError("layer selection: too many layers");
  LayerSelection s;
  for (std::size_t l = 0; l < num_layers; ++l) s.insert(l);
  return s;
}

void LayerSelection::insert(std::size_t layer) {
  if (layer >= kMaxLayers) throw UsageError("layer selection: layer index " + std::to_string(layer) + " out of range");
  mask_ |= 1u << layer;
}

std::size_t LayerSelection::size() const { return static_cast<std::size_t>(std::popcount(mask_)); }

std::size_t LayerSelection::bound() const { return mask_ == 0 ? 0 : 32 - static_cast<std::size_t>(std::countl_zero(mask_)); }

void LayerSelection::validate(std::size_t num_layers) const {
  if (bound() > num_layers) {
    throw UsageError("layer selection " + to_string() + " has a layer >= " + std::to_string(num_layers));
  }
}

std::vector<std::size_t> LayerSelection::layers() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < kMaxLayers; ++l) {
    if (contains(l)) out.push_back(l);
  }
  return out;
}

std::string LayerSelection::to_string() const {
  std::string s = "{";
  bool first = true;
  for (std::size_t l : layers()) {
    if (!first) s += ",";
    s += std::to_string(l);
    first = false;
  }
  return s + "}";
}

}  // namespace fsb::decoder
