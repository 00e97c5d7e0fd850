#include "fsb/pipeline/plan.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "fsb/error.hpp"

namespace fsb::pipeline {
namespace {

constexpr std::array<const char*, static_cast<std::size_t>(Resource::count)> kResourceNames{
    "image",      "body_box",      "keypoints",     "hand_boxes",  "body_crop", "hand_crops",
    "body_features", "hand_features", "body_params", "hand_params", "merged"};

constexpr std::array<const char*, static_cast<std::size_t>(Buffer::count)> kBufferNames{"grids", "crops", "features",
                                                                                      "prompts", "regions"};

}  // namespace

const char* resource_name(Resource r) { return kResourceNames[static_cast<std::size_t>(r)]; }
const char* buffer_name(Buffer b) { return kBufferNames[static_cast<std::size_t>(b)]; }

const char* op_name(Op op) {
  switch (op) {
    case Op::detect_dense: return "detect_dense";
    case Op::detect_prior: return "detect_prior";
    case Op::hand_boxes_prior: return "hand_boxes_prior";
    case Op::hand_boxes_from_body: return "hand_boxes_from_body";
    case Op::crop_body: return "crop_body";
    case Op::crop_hands: return "crop_hands";
    case Op::crop_all: return "crop_all";
    case Op::encode_body: return "encode_body";
    case Op::encode_hands: return "encode_hands";
    case Op::encode_all: return "encode_all";
    case Op::decode_body: return "decode_body";
    case Op::decode_hands: return "decode_hands";
    case Op::merge: return "merge";
    case Op::refine: return "refine";
  }
  return "?";
}

std::size_t BufferSpec::size() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

PipelinePlan::PipelinePlan(const PipelineConfig& cfg, const decoder::ModelConfig& model, priors::ImageSize image,
                           std::size_t body_keypoints)
    : mode_(cfg.plan), image_(image) {
  using R = Resource;
  const bool hands = cfg.hands;
  auto add = [&](Op op, Stage timer, std::vector<R> reads, std::vector<R> writes) {
    stages_.push_back({op, timer, std::move(reads), std::move(writes)});
  };

  if (cfg.keypoint_prior) {
    add(Op::detect_prior, Stage::detect, {R::image}, {R::body_box, R::keypoints});
    if (hands) add(Op::hand_boxes_prior, Stage::hand_boxes, {R::keypoints, R::body_box}, {R::hand_boxes});
  } else {
    add(Op::detect_dense, Stage::detect, {R::image}, {R::body_box});
  }
  if (cfg.batch == BatchMode::full && hands) {
    add(Op::crop_all, Stage::crop, {R::image, R::body_box, R::hand_boxes}, {R::body_crop, R::hand_crops});
    add(Op::encode_all, Stage::encode, {R::body_crop, R::hand_crops}, {R::body_features, R::hand_features});
    add(Op::decode_body, Stage::body_decode, {R::body_features}, {R::body_params});
    add(Op::decode_hands, Stage::hand_decode, {R::hand_features}, {R::hand_params});
  } else {
    add(Op::crop_body, Stage::crop, {R::image, R::body_box}, {R::body_crop});
    add(Op::encode_body, Stage::encode, {R::body_crop}, {R::body_features});
    add(Op::decode_body, Stage::body_decode, {R::body_features}, {R::body_params});
    if (hands) {
      if (!cfg.keypoint_prior) {
        add(Op::hand_boxes_from_body, Stage::hand_boxes, {R::body_params, R::body_box}, {R::hand_boxes});
      }
      add(Op::crop_hands, Stage::crop, {R::image, R::hand_boxes}, {R::hand_crops});
      add(Op::encode_hands, Stage::encode, {R::hand_crops}, {R::hand_features});
      add(Op::decode_hands, Stage::hand_decode, {R::hand_features}, {R::hand_params});
    }
  }
  if (hands) {
    add(Op::merge, Stage::merge, {R::body_params, R::hand_params}, {R::merged});
  } else {
    add(Op::merge, Stage::merge, {R::body_params}, {R::merged});
  }
  if (cfg.refine) add(Op::refine, Stage::refine, {R::merged, R::body_features}, {R::body_params, R::merged});

  const std::size_t crops = hands ? 3 : 1;
  const std::size_t s = model.crop_size;
  const auto h = static_cast<std::size_t>(image.height), w = static_cast<std::size_t>(image.width);
  buffers_ = {
      {Buffer::grids, {crops, s, s, 2}},
      {Buffer::crops, {crops, s, s, 3}},
      {Buffer::features, {crops, model.feature_tokens(), model.dim}},
      {Buffer::prompts, {body_keypoints, 2}},
      // A two-pass crop copies at most the whole frame per crop.
      {Buffer::regions, {cfg.crop == CropPrep::two_pass ? crops : 0, h, w, 3}},
  };
  validate();

  if (mode_ == PlanMode::fast_static) {
    std::size_t total = 0;
    for (const auto& b : buffers_) total += b.size();
    storage_.assign(total, 0.0f);
    std::size_t offset = 0;
    for (const auto& b : buffers_) {
      bound_[static_cast<std::size_t>(b.id)] = std::span<float>(storage_).subspan(offset, b.size());
      offset += b.size();
    }
  }
}

void PipelinePlan::validate() const {
  std::array<bool, static_cast<std::size_t>(Resource::count)> ready{};
  ready[static_cast<std::size_t>(Resource::image)] = true;
  for (const StageSpec& st : stages_) {
    for (Resource r : st.reads) {
      if (!ready[static_cast<std::size_t>(r)]) {
        throw UsageError(std::string("plan: stage ") + op_name(st.op) + " reads " + resource_name(r) +
                         " before any stage produces it");
      }
    }
    for (Resource r : st.writes) ready[static_cast<std::size_t>(r)] = true;
  }
  if (!ready[static_cast<std::size_t>(Resource::merged)]) throw UsageError("plan: no stage produces the merged parameters");
}

void PipelinePlan::begin_frame(numkit::Workspace& ws) {
  if (mode_ == PlanMode::fast_static) return;
  for (const auto& b : buffers_) {
    // Regions are taken per crop at their actual size.
    bound_[static_cast<std::size_t>(b.id)] = b.id == Buffer::regions ? std::span<float>{} : ws.take(b.size());
  }
}

std::string PipelinePlan::describe() const {
  std::string s = mode_ == PlanMode::fast_static ? "fast_static:" : "serial_dynamic:";
  for (const StageSpec& st : stages_) {
    s += ' ';
    s += op_name(st.op);
  }
  return s;
}

}  // namespace fsb::pipeline
