#include <cmath>
#include <sstream>

#include "criteria.hpp"
#include "fsb/bodymodel/toy_models.hpp"
#include "fsb/decoder/decoder.hpp"
#include "fsb/decoder/encoder.hpp"
#include "fsb/numkit/alloc_counter.hpp"
#include "fsb/numkit/parallel.hpp"
#include "fsb/pipeline/bench.hpp"
#include "fsb/pipeline/equivalence.hpp"
#include "support.hpp"

namespace fsb::acceptance {
namespace {

using namespace fsb::pipeline;

const body::ToyModels& models() {
  static const body::ToyModels m = body::make_toy_models(7);
  return m;
}

const decoder::FrozenModel& model() {
  static const decoder::FrozenModel m = decoder::make_model({}, 3);
  return m;
}

struct Frame {
  priors::Scene scene;
  numkit::Array image;
};

Frame frame(std::uint64_t seed) {
  Frame f{priors::random_scene(seed), {}};
  f.image = priors::render_scene(f.scene, models().mhr);
  return f;
}

template <typename... T>
std::string cat(const T&... parts) {
  std::ostringstream s;
  (s << ... << parts);
  return s.str();
}

}  // namespace

Outcome restructuring_equivalence() {
  const Stopwatch sw;
  int exact = 0;
  std::string first_failure;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Frame f = frame(seed);
    // Both pathways crop the same boxes; the fast one's prior boxes are reused by the serial one.
    const RunResult fast = run_fast(model(), models().mhr, f.scene, f.image).result;
    const BoxOverride boxes{fast.body_box, fast.hand_boxes[0], fast.hand_boxes[1]};
    const RunResult serial = run_serial(model(), models().mhr, f.scene, f.image, boxes).result;
    PipelineConfig cfg = equivalence_config();
    cfg.boxes = boxes;
    const RunResult eq = run_fast(model(), models().mhr, f.scene, f.image, cfg).result;
    const EquivalenceReport rep = check_equivalence(serial, eq, Tolerances::exact());
    const bool ok = rep.pass && serial.merged == eq.merged && eq.counters.encoder_calls == 1;
    exact += ok ? 1 : 0;
    if (!ok && first_failure.empty()) first_failure = cat(" first failure seed ", seed, ": ", rep.to_string());
  }
  const double t = sw.seconds();
  return {exact == 50 && t < 60.0, cat(exact, "/50 scenes bit-identical, ", t, " s (limit 60 s)", first_failure)};
}

Outcome encoder_accounting() {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Frame f = frame(seed);
    const FrameCounters s = run_serial(model(), models().mhr, f.scene, f.image).result.counters;
    const FrameCounters q = run_fast(model(), models().mhr, f.scene, f.image).result.counters;
    const bool serial_ok = s.encoder_calls == 3 && s.encoder_batch == std::array<std::size_t, kMaxEncoderCalls>{1, 1, 1, 0};
    const bool fast_ok = q.encoder_calls == 1 && q.encoder_batch == std::array<std::size_t, kMaxEncoderCalls>{3, 0, 0, 0};
    ok += serial_ok && fast_ok ? 1 : 0;
  }
  // Counts are per run, not cumulative, on a reused pipeline.
  const Frame f = frame(0);
  Pipeline serial(model(), models().mhr, PipelineConfig::serial(), f.scene.image);
  Pipeline fast(model(), models().mhr, PipelineConfig::fast(), f.scene.image);
  int repeat_ok = 0;
  for (int i = 0; i < 10; ++i) {
    repeat_ok += serial.run(f.scene, f.image).counters.encoder_calls == 3 && fast.run(f.scene, f.image).counters.encoder_calls == 1;
  }
  return {ok == 50 && repeat_ok == 10,
          cat(ok, "/50 scenes with serial 3 x batch 1 and fast 1 x batch 3; ", repeat_ok, "/10 repeated runs")};
}

Outcome gating_semantics() {
  using namespace fsb::decoder;
  const ModelConfig& mc = model().config;
  int full_ok = 0, empty_ok = 0, count_ok = 0, cases = 0, subsets = 0;
  for (const DecoderWeights* w : {&model().body, &model().hand}) {
    Decoder dec(*w, models().mhr, mc.feature_tokens());
    const std::size_t layers = dec.num_layers();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const numkit::Array crops = testing::random_array({1, mc.crop_size, mc.crop_size, 3}, 100 + seed, 0.0f, 1.0f);
      const numkit::Array enc = encode(model().encoder, crops);
      const numkit::Array feats({mc.feature_tokens(), mc.dim}, {enc.data().begin(), enc.data().end()});
      std::vector<float> prompts;
      if (seed % 2 == 1 && w->prompt_w.size() > 0) {
        const numkit::Array p = testing::random_array({w->prompt_w.dim(0)}, 200 + seed, -1.0f, 1.0f);
        prompts.assign(p.data().begin(), p.data().end());
      }
      ++cases;
      const DecodeResult ungated = decode_reference(*w, models().mhr, feats, prompts);
      bool same = true;
      for (bool consolidated : {false, true}) {
        DecodeCounters c;
        same = same && dec.decode_one(feats, {.selection = LayerSelection::full(layers), .consolidated = consolidated}, c, prompts) == ungated;
      }
      full_ok += same ? 1 : 0;

      DecodeCounters c0;
      dec.decode_one(feats, {.selection = LayerSelection::none()}, c0, prompts);
      empty_ok += c0.fk_calls == 0 && c0.projection_calls == 0 && c0.intermediate_predictions == 0 ? 1 : 0;

      for (std::uint32_t mask = 0; mask < (1u << layers); ++mask) {
        LayerSelection s;
        for (std::size_t l = 0; l < layers; ++l) {
          if ((mask >> l) & 1u) s.insert(l);
        }
        DecodeCounters c;
        dec.decode_one(feats, {.selection = s, .consolidated = mask % 2 == 0}, c, prompts);
        ++subsets;
        count_ok += c.intermediate_predictions == s.size() && c.fk_calls == s.size() && c.projection_calls == s.size();
      }
    }
  }
  return {full_ok == cases && empty_ok == cases && count_ok == subsets,
          cat("full set equals ungated ", full_ok, "/", cases, "; empty set with zero FK/projection ", empty_ok, "/", cases,
              "; counter equals |S| ", count_ok, "/", subsets, " subsets")};
}

Outcome static_plan() {
  std::string detail;
  bool pass = true;
  for (std::size_t threads : {1, 2}) {
    numkit::set_num_threads(threads);
    for (const PipelineConfig& cfg : {PipelineConfig::fast(), equivalence_config()}) {
      const Frame f0 = frame(20), f1 = frame(21);
      Pipeline p(model(), models().mhr, cfg, f0.scene.image);
      RunResult out;
      for (int i = 0; i < 10; ++i) p.run(i % 2 ? f1.scene : f0.scene, i % 2 ? f1.image : f0.image, out);
      const numkit::alloc::Probe probe;
      for (int i = 0; i < 50; ++i) p.run(i % 2 ? f1.scene : f0.scene, i % 2 ? f1.image : f0.image, out);
      const auto n = probe.allocations();
      pass = pass && n == 0;
      detail += cat(detail.empty() ? "" : ", ", n);
    }
  }
  numkit::set_num_threads(1);
  // The counter hook has to see allocations for the check to mean anything.
  const Frame f = frame(22);
  Pipeline serial(model(), models().mhr, PipelineConfig::serial(), f.scene.image);
  RunResult out;
  serial.run(f.scene, f.image, out);
  const numkit::alloc::Probe probe;
  serial.run(f.scene, f.image, out);
  const auto eager = probe.allocations();
  return {pass && eager > 0,
          cat("allocations over 50 steady-state frames (fast, unpruned) x (1, 2 threads): ", detail,
              "; serial_dynamic frame allocates ", eager)};
}

Outcome pipeline_speedup() {
  const Stopwatch sw;
  const BenchResult r = bench(model(), models().mhr, default_waterfall(), {.frames = 100, .warmup = 10, .scenes = 8, .seed = 0});
  const double t = sw.seconds();
  std::string rows;
  for (const WaterfallRow& row : r.rows) rows += cat(rows.empty() ? "" : " > ", row.toggle, " ", row.cum_ms);
  const bool monotone = r.monotone(0.05);
  return {r.speedup() >= 2.0 && monotone && t < 300.0,
          cat("speedup ", r.speedup(), "x (need 2), ", monotone ? "monotone" : "NOT monotone", " within 5%, ", t,
              " s (limit 300 s); ms: ", rows)};
}

Outcome prior_robustness() {
  // Mean over scenes of ||theta_sigma - theta_0|| / ||theta_0|| on the merged parameters.
  std::string detail;
  bool pass = true;
  for (float sigma : {1.0f, 2.0f, 4.0f, 8.0f}) {
    double mean = 0.0, worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Frame f = frame(s);
      PipelineConfig noisy = PipelineConfig::fast();
      noisy.keypoint_noise = sigma;
      noisy.noise_seed = s + 1;
      const RunResult a = run_fast(model(), models().mhr, f.scene, f.image).result;
      const RunResult b = run_fast(model(), models().mhr, f.scene, f.image, noisy).result;
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < body::kPoseDim; ++i) {
        num += std::pow(static_cast<double>(a.merged.values[i]) - b.merged.values[i], 2);
        den += std::pow(static_cast<double>(a.merged.values[i]), 2);
      }
      const double d = std::sqrt(num / den);
      mean += d / 100.0;
      worst = std::max(worst, d);
    }
    pass = pass && mean <= 0.05;
    detail += cat(detail.empty() ? "" : ", ", "sigma ", sigma, ": ", 100.0 * mean, "% (worst scene ", 100.0 * worst, "%)");
  }
  return {pass, "mean drift over 100 scenes (limit 5%) " + detail};
}

}  // namespace fsb::acceptance
