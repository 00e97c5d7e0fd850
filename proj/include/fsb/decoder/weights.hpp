#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fsb/bodymodel/pose.hpp"
#include "fsb/decoder/config.hpp"
#include "fsb/numkit/array.hpp"
#include "fsb/numkit/kernels.hpp"

namespace fsb::decoder {

inline constexpr std::size_t kCameraDim = 3;  // weak perspective: scale, tx, ty
inline constexpr std::size_t kHeadDim = body::kPoseDim + kCameraDim;

struct EncoderBlock {
  numkit::AttnWeights attn;
  numkit::MlpWeights mlp;
};

// Patch transformer over square RGB inputs.
struct EncoderWeights {
  std::size_t input_size = 0;
  std::size_t patch = 0;
  numkit::Array patch_w;  // (p*p*3) x D
  numkit::Array patch_b;  // D
  numkit::Array pos;      // tokens x D
  std::vector<EncoderBlock> blocks;

  std::size_t dim() const { return patch_w.dim(1); }
  std::size_t grid() const { return input_size / patch; }
  std::size_t tokens() const { return grid() * grid(); }
};

struct DecoderLayer {
  numkit::AttnWeights self_attn;
  numkit::AttnWeights cross_attn;
  numkit::MlpWeights mlp;
};

// Token layout: [mhr | prompt x P | kp2d x K | kp3d x K | hand x H].
struct TokenLayout {
  std::size_t prompts = 0;
  std::size_t keypoints = 0;
  std::size_t hand = 0;

  std::size_t mhr() const { return 0; }
  std::size_t prompt_begin() const { return 1; }
  std::size_t kp2d_begin() const { return 1 + prompts; }
  std::size_t kp3d_begin() const { return 1 + prompts + keypoints; }
  std::size_t hand_begin() const { return 1 + prompts + 2 * keypoints; }
  std::size_t size() const { return 1 + prompts + 2 * keypoints + hand; }
};

struct DecoderWeights {
  TokenLayout layout;
  std::vector<std::size_t> keypoint_joints;  // joint index behind each keypoint token
  numkit::Array init_tokens;                 // M x D
  numkit::Array init_pos_2d, init_pos_3d;    // K x D
  std::vector<DecoderLayer> layers;
  numkit::Array head_w, head_b;              // D x (76 + 3), 76 + 3
  numkit::Array mean_output;                 // 76 + 3
  numkit::Array phi2d_w, phi2d_b;            // 2 x D, D
  numkit::Array phi3d_w, phi3d_b;            // 3 x D, D
  numkit::Array prompt_w, prompt_b;          // 2K x (P*D), P*D

  std::size_t dim() const { return init_tokens.dim(1); }
  std::size_t num_layers() const { return layers.size(); }
};

struct FrozenModel {
  ModelConfig config;
  EncoderWeights encoder;
  DecoderWeights body;
  DecoderWeights hand;
};

// Keypoints tracked by the hand decoder: both wrists and both wrist children.
const std::vector<std::size_t>& hand_keypoint_joints();

// Seeded frozen initialization. prompt weights can be zeroed to make the
// refinement pass a no-op.
FrozenModel make_model(const ModelConfig& cfg, std::uint64_t seed, bool zero_prompt_weights = false);
EncoderWeights make_encoder(std::size_t input_size, std::size_t patch, std::size_t dim, std::size_t heads,
                            std::size_t mlp_hidden, std::size_t layers, std::uint64_t seed);

// Directory of FSB1 arrays plus a manifest carrying the config.
void save_model(const std::filesystem::path& dir, const FrozenModel& m);
FrozenModel load_model(const std::filesystem::path& dir);

bool bit_equal(const FrozenModel& a, const FrozenModel& b);

}  // namespace fsb::decoder
