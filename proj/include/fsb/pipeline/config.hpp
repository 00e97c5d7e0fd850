#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "fsb/decoder/config.hpp"
#include "fsb/priors/boxes.hpp"

namespace fsb::pipeline {

enum class CropPrep {
  two_pass,  // copy the covering pixel region, then resample it
  native,    // resample straight from the frame into the batch buffer
};

enum class PlanMode { serial_dynamic, fast_static };

enum class BatchMode {
  full,   // one encoder call over body + hand crops, one decoder call over both hands
  hands,  // body alone, then both hands in one encoder call and one decoder call
  none,   // one call per crop
};

const char* batch_mode_name(BatchMode m);  // "full_batch", "hand_batch", "no_batch"

// Fixed boxes that replace whatever the detection stages produce. Used to
// compare pathways on identical inputs.
struct BoxOverride {
  priors::BBox body;
  priors::BBox left_hand;
  priors::BBox right_hand;
};

struct PipelineConfig {
  // Prior-driven detection (keypoint stub) instead of the dense detector.
  // The stub also supplies the wrist positions, so hand boxes no longer
  // wait for the body decoder.
  bool keypoint_prior = true;
  BatchMode batch = BatchMode::full;
  decoder::LayerSelection body_layers{0, 1, 2};
  decoder::LayerSelection hand_layers{0, 1};
  bool refine = false;
  PlanMode plan = PlanMode::fast_static;
  bool consolidated = true;
  CropPrep crop = CropPrep::native;
  // Run the per-crop preparations on the worker pool.
  bool parallel_crops = true;
  bool hands = true;
  // Pose correctives in the per-layer mesh of the unconsolidated decode.
  bool correctives = false;

  float hand_alpha = 3.0f;
  float keypoint_noise = 0.0f;  // pixels
  std::uint64_t noise_seed = 0;
  std::optional<BoxOverride> boxes;

  // The unoptimized reference: dense detector, one encoder call per crop,
  // every layer gated in, refinement pass, eager buffers.
  static PipelineConfig serial(const decoder::ModelConfig& m = {});
  static PipelineConfig fast();

  // ConfigError on inconsistent settings.
  void validate(const decoder::ModelConfig& m) const;

  std::string to_json() const;
  // Fields absent from the JSON keep their value in base (or in the named
  // "preset"); unknown fields are a ConfigError.
  static PipelineConfig from_json(const std::string& text, const decoder::ModelConfig& m = {},
                                  const PipelineConfig& base = fast());
};

}  // namespace fsb::pipeline
