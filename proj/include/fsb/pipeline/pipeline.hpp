#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>

#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/bodymodel/template.hpp"
#include "fsb/decoder/decoder.hpp"
#include "fsb/decoder/weights.hpp"
#include "fsb/numkit/array.hpp"
#include "fsb/numkit/workspace.hpp"
#include "fsb/pipeline/config.hpp"
#include "fsb/pipeline/detector.hpp"
#include "fsb/pipeline/latency.hpp"
#include "fsb/pipeline/plan.hpp"
#include "fsb/priors/scene.hpp"

namespace fsb::pipeline {

inline constexpr std::size_t kMaxEncoderCalls = 4;

struct FrameCounters {
  std::size_t encoder_calls = 0;
  std::array<std::size_t, kMaxEncoderCalls> encoder_batch{};  // batch size of each call, in order
  decoder::DecodeCounters body;
  decoder::DecodeCounters hand;
};

struct RunResult {
  body::PoseState merged;
  decoder::DecodeResult body;
  std::array<decoder::DecodeResult, 2> hands{};  // left, right
  priors::BBox body_box;                          // detector output
  priors::BBox body_crop;                         // square region fed to the encoder
  std::array<priors::BBox, 2> hand_boxes{};
  float detector_score = 1.0f;
  FrameCounters counters;
};

// One configured pathway. Holds the plan, scratch memory and decoders, so a
// Pipeline is meant to be used by one thread at a time.
class Pipeline {
 public:
  // model and mhr must outlive the pipeline.
  Pipeline(const decoder::FrozenModel& model, const body::BodyTemplate& mhr, PipelineConfig cfg,
           priors::ImageSize image = {}, std::uint64_t detector_seed = 0);
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  // image: H x W x 3 rendering of scene. The scene supplies the keypoint
  // prior's ground truth and the frame size.
  void run(const priors::Scene& scene, const numkit::Array& image, RunResult& out);
  RunResult run(const priors::Scene& scene, const numkit::Array& image);

  const PipelineConfig& config() const { return cfg_; }
  const PipelinePlan& plan() const { return plan_; }
  StageTimers& timers() { return timers_; }
  LatencyReport report() const;

 private:
  void crop(std::span<const priors::BBox> boxes, std::size_t first_slot);
  void encode(std::size_t first_slot, std::size_t count, RunResult& out);
  numkit::ConstMatView features(std::size_t slot) const;
  body::SkinOptions mesh_options() const { return {.correctives = cfg_.correctives, .sparse_weights = false}; }
  void decode_hands(RunResult& out);
  void refine(RunResult& out);

  const decoder::FrozenModel& model_;
  const body::BodyTemplate& mhr_;
  PipelineConfig cfg_;
  PipelinePlan plan_;
  std::unique_ptr<DenseDetector> detector_;
  decoder::Decoder body_decoder_;
  decoder::Decoder hand_decoder_;
  numkit::Workspace ws_;
  StageTimers timers_;
  const numkit::Array* image_ = nullptr;
  priors::Detection detection_;
};

struct RunOutput {
  RunResult result;
  LatencyReport latency;
};

// Single-frame conveniences over a freshly built Pipeline.
RunOutput run_serial(const decoder::FrozenModel& model, const body::BodyTemplate& mhr, const priors::Scene& scene,
                     const numkit::Array& image, std::optional<BoxOverride> boxes = {}, bool hands = true);
RunOutput run_fast(const decoder::FrozenModel& model, const body::BodyTemplate& mhr, const priors::Scene& scene,
                   const numkit::Array& image, const PipelineConfig& cfg = PipelineConfig::fast());

// Square box of side max(w, h) about the box center.
priors::BBox square_box(const priors::BBox& b);

// Fast-pathway settings that restructure without pruning: every layer gated
// in and the refinement pass kept.
PipelineConfig equivalence_config(const decoder::ModelConfig& m = {});

}  // namespace fsb::pipeline
