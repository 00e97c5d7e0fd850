#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "fsb/decoder/config.hpp"
#include "fsb/numkit/array.hpp"
#include "fsb/numkit/workspace.hpp"
#include "fsb/pipeline/config.hpp"
#include "fsb/pipeline/latency.hpp"
#include "fsb/priors/boxes.hpp"

namespace fsb::pipeline {

// Values flowing between stages.
enum class Resource : std::size_t {
  image,
  body_box,
  keypoints,
  hand_boxes,
  body_crop,
  hand_crops,
  body_features,
  hand_features,
  body_params,
  hand_params,
  merged,
  count
};
const char* resource_name(Resource r);

enum class Op {
  detect_dense,
  detect_prior,
  hand_boxes_prior,      // from detected wrists
  hand_boxes_from_body,  // from the body decoder's projected wrists
  crop_body,
  crop_hands,
  crop_all,
  encode_body,
  encode_hands,  // one call per hand
  encode_all,    // one call, batch of three
  decode_body,
  decode_hands,
  merge,
  refine,
};
const char* op_name(Op op);

struct StageSpec {
  Op op;
  Stage timer;
  std::vector<Resource> reads;
  std::vector<Resource> writes;
};

// Float tensors with a fixed shape for the lifetime of the plan.
enum class Buffer : std::size_t { grids, crops, features, prompts, regions, count };
const char* buffer_name(Buffer b);

struct BufferSpec {
  Buffer id;
  numkit::Shape shape;
  std::size_t size() const;
};

// Shape-frozen execution plan. The stage list is derived from the pipeline
// configuration and checked to be a valid topological order of its declared
// reads and writes. In fast_static mode every buffer is carved out of one
// block allocated at construction; in serial_dynamic mode each frame
// materializes them afresh from the frame workspace.
class PipelinePlan {
 public:
  PipelinePlan(const PipelineConfig& cfg, const decoder::ModelConfig& model, priors::ImageSize image,
               std::size_t body_keypoints);

  PlanMode mode() const { return mode_; }
  const std::vector<StageSpec>& stages() const { return stages_; }
  const std::vector<BufferSpec>& buffers() const { return buffers_; }
  priors::ImageSize image() const { return image_; }

  // UsageError when a stage reads a resource no earlier stage produced.
  void validate() const;

  // Binds buffers for one frame. Dynamic mode takes fresh memory from ws.
  void begin_frame(numkit::Workspace& ws);
  std::span<float> buffer(Buffer b) const { return bound_[static_cast<std::size_t>(b)]; }

  std::string describe() const;

 private:
  PlanMode mode_;
  priors::ImageSize image_;
  std::vector<StageSpec> stages_;
  std::vector<BufferSpec> buffers_;
  std::vector<float> storage_;
  std::array<std::span<float>, static_cast<std::size_t>(Buffer::count)> bound_{};
};

}  // namespace fsb::pipeline
