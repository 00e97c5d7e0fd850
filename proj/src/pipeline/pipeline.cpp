#include "fsb/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "fsb/decoder/encoder.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/kernels.hpp"
#include "fsb/numkit/parallel.hpp"

namespace fsb::pipeline {
namespace {

using numkit::ConstMatView;

constexpr std::array<std::size_t, 2> kWrists{body::kLeftWrist, body::kRightWrist};

// Integer pixel range [x0, x1] x [y0, y1] covering every grid point and its
// bilinear neighbours, clamped to the frame.
struct Region {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::size_t width() const { return x1 - x0 + 1; }
  std::size_t height() const { return y1 - y0 + 1; }
  std::size_t size() const { return width() * height() * 3; }
};

Region covering_region(std::span<const float> grid, priors::ImageSize image) {
  float min_x = grid[0], max_x = grid[0], min_y = grid[1], max_y = grid[1];
  for (std::size_t i = 2; i < grid.size(); i += 2) {
    min_x = std::min(min_x, grid[i]);
    max_x = std::max(max_x, grid[i]);
    min_y = std::min(min_y, grid[i + 1]);
    max_y = std::max(max_y, grid[i + 1]);
  }
  auto clamp = [](float v, int hi) {
    return static_cast<std::size_t>(std::clamp(v, 0.0f, static_cast<float>(hi)));
  };
  Region r;
  r.x0 = clamp(std::floor(min_x), image.width - 1);
  r.y0 = clamp(std::floor(min_y), image.height - 1);
  r.x1 = clamp(std::floor(max_x) + 1.0f, image.width - 1);
  r.y1 = clamp(std::floor(max_y) + 1.0f, image.height - 1);
  return r;
}

}  // namespace

priors::BBox square_box(const priors::BBox& b) {
  const float cx = 0.5f * (b.x_min + b.x_max), cy = 0.5f * (b.y_min + b.y_max);
  const float half = 0.5f * std::max(b.width(), b.height());
  return {cx - half, cy - half, cx + half, cy + half};
}

PipelineConfig equivalence_config(const decoder::ModelConfig& m) {
  PipelineConfig c = PipelineConfig::fast();
  c.body_layers = decoder::LayerSelection::full(m.body_layers);
  c.hand_layers = decoder::LayerSelection::full(m.hand_layers);
  c.refine = true;
  c.crop = CropPrep::two_pass;
  return c;
}

Pipeline::Pipeline(const decoder::FrozenModel& model, const body::BodyTemplate& mhr, PipelineConfig cfg,
                   priors::ImageSize image, std::uint64_t detector_seed)
    : model_(model),
      mhr_(mhr),
      cfg_((cfg.validate(model.config), std::move(cfg))),
      plan_(cfg_, model.config, image, model.body.layout.keypoints),
      body_decoder_(model.body, mhr, model.config.feature_tokens()),
      hand_decoder_(model.hand, mhr, model.config.feature_tokens()),
      ws_(cfg_.plan == PlanMode::fast_static ? numkit::Workspace::Mode::arena : numkit::Workspace::Mode::dynamic) {
  if (!cfg_.keypoint_prior) detector_ = std::make_unique<DenseDetector>(detector_seed);
}

Pipeline::~Pipeline() = default;

LatencyReport Pipeline::report() const {
  return timers_.report(cfg_.plan == PlanMode::fast_static ? "fast_static" : "serial_dynamic");
}

ConstMatView Pipeline::features(std::size_t slot) const {
  const std::size_t n = model_.config.feature_tokens(), d = model_.config.dim;
  return {plan_.buffer(Buffer::features).data() + slot * n * d, n, d};
}

void Pipeline::crop(std::span<const priors::BBox> boxes, std::size_t first_slot) {
  const std::size_t s = model_.config.crop_size;
  const std::size_t grid_len = s * s * 2, crop_len = s * s * 3;
  const priors::ImageSize size = plan_.image();
  const auto frame_w = static_cast<std::size_t>(size.width), frame_h = static_cast<std::size_t>(size.height);
  const std::span<float> grids = plan_.buffer(Buffer::grids);
  const std::span<float> crops = plan_.buffer(Buffer::crops);
  const ConstMatView frame{image_->data().data(), frame_h * frame_w, 3};

  std::array<Region, 3> regions{};
  std::array<std::span<float>, 3> region_mem{};
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const std::size_t slot = first_slot + i;
    const std::span<float> grid = grids.subspan(slot * grid_len, grid_len);
    priors::crop_grid(boxes[i], s, grid);
    if (cfg_.crop == CropPrep::two_pass) {
      regions[i] = covering_region(grid, size);
      const std::size_t frame_len = frame_w * frame_h * 3;
      region_mem[i] = plan_.mode() == PlanMode::fast_static
                          ? plan_.buffer(Buffer::regions).subspan(slot * frame_len, regions[i].size())
                          : ws_.take(regions[i].size());
    }
  }

  auto prepare = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t slot = first_slot + i;
      const std::span<float> grid = grids.subspan(slot * grid_len, grid_len);
      const std::span<float> out = crops.subspan(slot * crop_len, crop_len);
      if (cfg_.crop == CropPrep::native) {
        numkit::bilinear_sample(frame, frame_h, frame_w, grid, out);
        continue;
      }
      // Copy the covering pixels, then resample them with the grid shifted
      // by the (integer) region origin.
      const Region& r = regions[i];
      float* dst = region_mem[i].data();
      for (std::size_t y = r.y0; y <= r.y1; ++y) {
        const float* src = frame.data + (y * frame_w + r.x0) * 3;
        dst = std::copy(src, src + r.width() * 3, dst);
      }
      const auto ox = static_cast<float>(r.x0), oy = static_cast<float>(r.y0);
      for (std::size_t p = 0; p < grid.size(); p += 2) {
        grid[p] -= ox;
        grid[p + 1] -= oy;
      }
      numkit::bilinear_sample(ConstMatView{region_mem[i].data(), r.width() * r.height(), 3}, r.height(), r.width(), grid,
                              out);
    }
  };
  if (cfg_.parallel_crops) {
    numkit::parallel_for(boxes.size(), 1, prepare);
  } else {
    prepare(0, boxes.size());
  }
  numkit::check_finite(crops.subspan(first_slot * crop_len, boxes.size() * crop_len), "crops");
}

void Pipeline::encode(std::size_t first_slot, std::size_t count, RunResult& out) {
  const std::size_t crop_len = model_.config.crop_size * model_.config.crop_size * 3;
  const std::size_t feat_len = model_.config.feature_tokens() * model_.config.dim;
  decoder::encode(model_.encoder, plan_.buffer(Buffer::crops).subspan(first_slot * crop_len, count * crop_len), count,
                  plan_.buffer(Buffer::features).subspan(first_slot * feat_len, count * feat_len), ws_);
  FrameCounters& c = out.counters;
  if (c.encoder_calls < kMaxEncoderCalls) c.encoder_batch[c.encoder_calls] = count;
  ++c.encoder_calls;
}

void Pipeline::decode_hands(RunResult& out) {
  const decoder::DecodeOptions opt{
      .selection = cfg_.hand_layers, .consolidated = cfg_.consolidated, .mesh = mesh_options()};
  const std::array<ConstMatView, 2> views{features(1), features(2)};
  if (cfg_.batch != BatchMode::none) {
    hand_decoder_.decode(views, {}, opt, out.hands, ws_, out.counters.hand);
  } else {
    for (std::size_t h = 0; h < 2; ++h) {
      hand_decoder_.decode(std::span(views).subspan(h, 1), {}, opt, std::span(out.hands).subspan(h, 1), ws_,
                           out.counters.hand);
    }
  }
}

void Pipeline::refine(RunResult& out) {
  // Second body pass prompted with the keypoints of the current estimate.
  const std::span<float> prompts = plan_.buffer(Buffer::prompts);
  decoder::project_keypoints(mhr_, decoder::DecodeResult{out.merged, out.body.camera}, model_.body.keypoint_joints,
                             prompts);
  const ConstMatView f = features(0);
  const decoder::DecodeOptions opt{
      .selection = cfg_.body_layers,
      .consolidated = cfg_.consolidated,
      .reuse_features = cfg_.consolidated,
      .mesh = mesh_options()};
  body_decoder_.decode(std::span(&f, 1), prompts, opt, std::span(&out.body, 1), ws_, out.counters.body);
  out.merged = cfg_.hands ? decoder::merge(out.body.params, &out.hands[0].params, &out.hands[1].params) : out.body.params;
}

void Pipeline::run(const priors::Scene& scene, const numkit::Array& image, RunResult& out) {
  const priors::ImageSize size = plan_.image();
  if (scene.image.width != size.width || scene.image.height != size.height) {
    throw ShapeError("pipeline: scene frame size differs from the plan's");
  }
  if (image.rank() != 3 || image.dim(0) != static_cast<std::size_t>(size.height) ||
      image.dim(1) != static_cast<std::size_t>(size.width) || image.dim(2) != 3) {
    throw ShapeError("pipeline: image must be H x W x 3 matching the plan");
  }
  image_ = &image;
  ws_.reset();
  plan_.begin_frame(ws_);
  out.counters = {};
  out.detector_score = 1.0f;

  timers_.begin_frame();
  const auto start = StageTimers::Clock::now();
  for (const StageSpec& st : plan_.stages()) {
    ScopedStage timed(&timers_, st.timer);
    switch (st.op) {
      case Op::detect_dense: {
        const DenseDetection d = detector_->detect(image, size);
        out.body_box = cfg_.boxes ? cfg_.boxes->body : d.body_box;
        out.detector_score = d.score;
        out.body_crop = square_box(out.body_box);
        break;
      }
      case Op::detect_prior:
        priors::detect_stub(scene, mhr_, cfg_.keypoint_noise, cfg_.noise_seed, detection_);
        out.body_box = cfg_.boxes ? cfg_.boxes->body : detection_.body_box;
        out.body_crop = square_box(out.body_box);
        break;
      case Op::hand_boxes_prior:
        for (std::size_t h = 0; h < 2; ++h) {
          const priors::Keypoint& w = detection_.keypoints[kWrists[h]];
          out.hand_boxes[h] = priors::hand_box(w.x, w.y, out.body_box, cfg_.hand_alpha, size);
        }
        break;
      case Op::hand_boxes_from_body: {
        std::array<float, 4> uv{};
        decoder::project_keypoints(mhr_, out.body, kWrists, uv);
        const priors::BBox& c = out.body_crop;
        const float cx = 0.5f * (c.x_min + c.x_max), cy = 0.5f * (c.y_min + c.y_max), half = 0.5f * c.width();
        for (std::size_t h = 0; h < 2; ++h) {
          out.hand_boxes[h] = priors::hand_box(cx + uv[2 * h] * half, cy + uv[2 * h + 1] * half, out.body_box,
                                               cfg_.hand_alpha, size);
        }
        break;
      }
      case Op::crop_body:
        crop(std::span(&out.body_crop, 1), 0);
        break;
      case Op::crop_hands:
        if (cfg_.boxes) out.hand_boxes = {cfg_.boxes->left_hand, cfg_.boxes->right_hand};
        crop(out.hand_boxes, 1);
        break;
      case Op::crop_all: {
        if (cfg_.boxes) out.hand_boxes = {cfg_.boxes->left_hand, cfg_.boxes->right_hand};
        const std::array<priors::BBox, 3> all{out.body_crop, out.hand_boxes[0], out.hand_boxes[1]};
        crop(all, 0);
        break;
      }
      case Op::encode_body:
        encode(0, 1, out);
        break;
      case Op::encode_hands:
        if (cfg_.batch == BatchMode::hands) {
          encode(1, 2, out);
        } else {
          encode(1, 1, out);
          encode(2, 1, out);
        }
        break;
      case Op::encode_all:
        encode(0, 3, out);
        break;
      case Op::decode_body: {
        const ConstMatView f = features(0);
        const decoder::DecodeOptions opt{
            .selection = cfg_.body_layers, .consolidated = cfg_.consolidated, .mesh = mesh_options()};
        body_decoder_.decode(std::span(&f, 1), {}, opt, std::span(&out.body, 1), ws_, out.counters.body);
        break;
      }
      case Op::decode_hands:
        decode_hands(out);
        break;
      case Op::merge:
        out.merged =
            cfg_.hands ? decoder::merge(out.body.params, &out.hands[0].params, &out.hands[1].params) : out.body.params;
        break;
      case Op::refine:
        refine(out);
        break;
    }
  }
  timers_.end_frame(StageTimers::Clock::now() - start);
  image_ = nullptr;
}

RunResult Pipeline::run(const priors::Scene& scene, const numkit::Array& image) {
  RunResult r;
  run(scene, image, r);
  return r;
}

RunOutput run_serial(const decoder::FrozenModel& model, const body::BodyTemplate& mhr, const priors::Scene& scene,
                     const numkit::Array& image, std::optional<BoxOverride> boxes, bool hands) {
  PipelineConfig cfg = PipelineConfig::serial(model.config);
  cfg.boxes = boxes;
  cfg.hands = hands;
  Pipeline p(model, mhr, cfg, scene.image);
  RunOutput out;
  p.run(scene, image, out.result);
  out.latency = p.report();
  out.latency.mode = "serial";
  return out;
}

RunOutput run_fast(const decoder::FrozenModel& model, const body::BodyTemplate& mhr, const priors::Scene& scene,
                   const numkit::Array& image, const PipelineConfig& cfg) {
  Pipeline p(model, mhr, cfg, scene.image);
  RunOutput out;
  p.run(scene, image, out.result);
  out.latency = p.report();
  out.latency.mode = "fast";
  return out;
}

}  // namespace fsb::pipeline
