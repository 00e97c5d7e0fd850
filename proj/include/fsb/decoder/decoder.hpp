#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/bodymodel/template.hpp"
#include "fsb/decoder/config.hpp"
#include "fsb/decoder/weights.hpp"
#include "fsb/numkit/array.hpp"
#include "fsb/numkit/workspace.hpp"

namespace fsb::decoder {

struct DecodeResult {
  body::PoseState params;
  std::array<float, kCameraDim> camera{};

  bool operator==(const DecodeResult&) const = default;
};

// Instrumentation: one FK call and one projection call per intermediate prediction.
struct DecodeCounters {
  std::uint64_t passes = 0;
  std::uint64_t intermediate_predictions = 0;
  std::uint64_t fk_calls = 0;
  std::uint64_t projection_calls = 0;
};

// Token state after one decoder layer.
struct TokenSequence {
  TokenLayout layout;
  numkit::Array tokens;  // M x D
  numkit::Array pos_2d;  // K x D, positional encodings the next layer will consume
  numkit::Array pos_3d;
  int last_updated_layer = -1;  // -1: still the initial encodings
};

// Per-layer record of one decode (batch item 0 only), for debugging dumps.
struct DecodeTrace {
  std::vector<TokenSequence> layers;
};

struct DecodeOptions {
  LayerSelection selection;
  // Operator consolidation: reuse the input-independent first self-attention,
  // project cross-attention keys/values once per feature map, and skip the
  // per-layer mesh that nothing downstream reads. Outputs are unchanged.
  bool consolidated = false;
  // Only with consolidated: features are the ones passed to the previous call,
  // so cached keys/values stay valid.
  bool reuse_features = false;
  // Skinning options for the per-layer mesh of the unconsolidated path.
  body::SkinOptions mesh{.correctives = false, .sparse_weights = false};
};

// Runs one decoder (body or hand weights) over a batch of feature maps.
// Items are processed layer by layer; each item's arithmetic is identical
// to decoding it alone.
class Decoder {
 public:
  static constexpr std::size_t kMaxBatch = 4;

  Decoder(const DecoderWeights& w, const body::BodyTemplate& t, std::size_t feature_tokens);

  // features: one N x D map per item. prompts: empty, or batch x 2K
  // crop-normalized keypoints fed through the prompt projection.
  void decode(std::span<const numkit::ConstMatView> features, std::span<const float> prompts,
              const DecodeOptions& opt, std::span<DecodeResult> out, numkit::Workspace& ws,
              DecodeCounters& counters, DecodeTrace* trace = nullptr);

  DecodeResult decode_one(const numkit::Array& features, const DecodeOptions& opt, DecodeCounters& counters,
                          std::span<const float> prompts = {}, DecodeTrace* trace = nullptr);

  const DecoderWeights& weights() const { return w_; }
  std::size_t num_layers() const { return w_.num_layers(); }

 private:
  void intermediate_prediction(std::span<const float> mhr_token, const DecodeOptions& opt, numkit::MatView pos2d,
                               numkit::MatView pos3d, numkit::Workspace& ws, DecodeCounters& counters) const;

  const DecoderWeights& w_;
  const body::BodyTemplate& t_;
  std::size_t feature_tokens_;
  std::vector<float> first_self_attn_;  // M x D, constant when no prompt is given
  std::vector<float> kv_cache_;         // layers x kMaxBatch x {K, V} x N x D
  std::size_t kv_items_ = 0;
};

// Plain ungated decoder: intermediate prediction after every layer, fresh
// buffers everywhere. Used as the reference for the gated implementation.
DecodeResult decode_reference(const DecoderWeights& w, const body::BodyTemplate& t, const numkit::Array& features,
                              std::span<const float> prompts = {}, std::vector<numkit::Array>* layer_tokens = nullptr);

// Output heads: mean + token * W + b.
DecodeResult decode_heads(const DecoderWeights& w, std::span<const float> mhr_token);

// Crop-normalized (u, v) of the given joints under the result's weak-perspective camera,
// relative to the pelvis. out: joints.size() x 2.
void project_keypoints(const body::BodyTemplate& t, const DecodeResult& r, std::span<const std::size_t> joints,
                       std::span<float> out);

// Overwrites the wrist-child rotations with the hand decoders' values.
// Hands are either both present or both absent.
body::PoseState merge(const body::PoseState& body, const body::PoseState* left, const body::PoseState* right);

}  // namespace fsb::decoder
