#include "fsb/cli/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/bodymodel/toy_models.hpp"
#include "fsb/cli/report.hpp"
#include "fsb/decoder/weights.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/fsb_io.hpp"
#include "fsb/pipeline/bench.hpp"
#include "fsb/pipeline/pipeline.hpp"
#include "fsb/priors/scene.hpp"
#include "fsb/projection/bench.hpp"
#include "fsb/projection/bridge.hpp"

namespace fsb::cli {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path.string() + ": cannot write");
  f << text;
  if (!f) throw IoError(path.string() + ": write failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path.string() + ": cannot open");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

json config_echo(const RunConfig& cfg) { return json::parse(cfg.to_json()); }

projection::Bridge make_bridge(const body::ToyModels& m, const std::optional<fs::path>& bary) {
  body::BaryMap map = bary ? projection::load_bary(*bary) : projection::precompute_bary(m.mhr, m.smpl).map;
  if (map.size() != m.smpl.num_vertices()) {
    throw ConfigError((bary ? bary->string() : std::string("bary map")) + ": does not match the target model");
  }
  return projection::Bridge(std::move(map), m.mhr);
}

// A synth output directory or the pairs bundle inside it.
projection::ProjectionDataset load_pairs(const fs::path& data) {
  return projection::load_dataset(fs::exists(data / "pairs") ? data / "pairs" : data);
}

json pose_json(const body::PoseState& p) { return std::vector<float>(p.values.begin(), p.values.end()); }

json box_json(const priors::BBox& b) { return {b.x_min, b.y_min, b.x_max, b.y_max}; }

json counters_json(const decoder::DecodeCounters& c) {
  return {{"passes", c.passes},
          {"intermediate_predictions", c.intermediate_predictions},
          {"fk_calls", c.fk_calls},
          {"projection_calls", c.projection_calls}};
}

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

std::string zero_padded(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

}  // namespace

int synth(const RunConfig& cfg, const SynthOptions& opt, std::ostream& log) {
  if (opt.n == 0) throw ConfigError("synth: n must be >= 1");
  const body::ToyModels m = body::make_toy_models(cfg.toy_seed);
  const projection::Bridge bridge = make_bridge(m, opt.bary);
  fs::create_directories(opt.out / "scenes");
  std::mt19937_64 rng(opt.seed);
  for (std::size_t i = 0; i < opt.n; ++i) {
    priors::save_scene(opt.out / "scenes" / ("scene_" + zero_padded(i) + ".json"), priors::random_scene(rng(), cfg.image));
  }
  const projection::ProjectionDataset d =
      projection::make_projection_dataset(m.mhr, bridge, m.smpl, opt.n, opt.seed, cfg.fit);
  projection::save_dataset(opt.out / "pairs", d);
  json echo{{"config", config_echo(cfg)}, {"n", opt.n}, {"seed", opt.seed}};
  write_text(opt.out / "config.json", echo.dump(2) + "\n");

  double worst = 0.0;
  for (float e : d.fit_error.data()) worst = std::max(worst, static_cast<double>(e));
  log << "synth: " << opt.n << " scenes and fitting pairs in " << opt.out.string() << " (worst fit error " << worst
      << ")\n";
  return kExitOk;
}

int precompute_bary(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const body::ToyModels m = body::make_toy_models(cfg.toy_seed);
  const projection::BaryResult r = projection::precompute_bary(m.mhr, m.smpl);
  projection::validate_bary(r.map, m.mhr.faces.size());
  projection::save_bary(out, r.map);
  json diag{{"config", config_echo(cfg)},
            {"target_vertices", r.map.size()},
            {"source_faces", m.mhr.faces.size()},
            {"max_distance", r.diagnostics.max_distance},
            {"degenerate_vertices", r.diagnostics.degenerate_vertices},
            {"degenerate_faces", r.diagnostics.degenerate_faces}};
  write_text(out / "diagnostics.json", diag.dump(2) + "\n");
  log << "precompute-bary: " << r.map.size() << " target vertices, max distance " << r.diagnostics.max_distance << ", "
      << r.diagnostics.degenerate_vertices.size() << " on degenerate faces\n";
  return kExitOk;
}

int fit(const RunConfig& cfg, const FitOptions& opt, std::ostream& log) {
  const body::ToyModels m = body::make_toy_models(cfg.toy_seed);
  const projection::Bridge bridge = make_bridge(m, opt.bary);
  const projection::ProjectionDataset d = load_pairs(opt.data);
  if (d.source.dim(1) != 3 * m.mhr.num_vertices()) throw ConfigError(opt.data.string() + ": meshes do not match the source model");
  const std::size_t n = d.size(), ns = d.source.dim(1);
  numkit::Array params({n, body::kPoseDim});
  std::vector<double> errors;
  std::size_t within = 0;
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < n; ++i) {
    const projection::FitResult r = projection::iterative_fit(d.source.data().subspan(i * ns, ns), bridge, m.smpl, cfg.fit);
    std::copy(r.pose.values.begin(), r.pose.values.end(), params.mutable_data().begin() + i * body::kPoseDim);
    errors.push_back(r.vertex_error);
    within += r.vertex_error <= opt.max_error ? 1 : 0;
  }
  const double total_ms = ms_since(t0);
  numkit::ArrayBundle b;
  b.put("params", params);
  numkit::save_bundle(opt.out / "params", b);
  const double fraction = static_cast<double>(within) / static_cast<double>(n);
  json rep{{"config", config_echo(cfg)}, {"errors", errors}, {"max_error", opt.max_error}, {"fraction_within", fraction}};
  write_text(opt.out / "fit.json", rep.dump(2) + "\n");
  write_text(opt.out / "timing.json", json{{"fits", n}, {"ms_per_fit", total_ms / static_cast<double>(n)}}.dump(2) + "\n");
  log << "fit: " << within << "/" << n << " within " << opt.max_error << " (" << total_ms / static_cast<double>(n)
      << " ms per fit)\n";
  return fraction < opt.min_fraction ? kExitThreshold : kExitOk;
}

int train_projector(const RunConfig& cfg, const TrainProjectorOptions& opt, std::ostream& log) {
  const body::ToyModels m = body::make_toy_models(cfg.toy_seed);
  const projection::Bridge bridge = make_bridge(m, opt.bary);
  projection::ProjectionDataset train = load_pairs(opt.data), held;
  if (opt.heldout_data) {
    held = load_pairs(*opt.heldout_data);
  } else {
    const std::size_t k = opt.heldout > 0 ? opt.heldout : std::max<std::size_t>(1, train.size() / 10);
    std::tie(train, held) = projection::split_dataset(train, k, cfg.train.seed);
  }
  const projection::TrainResult r = projection::train_projector(train, held, bridge, m.smpl, cfg.train, cfg.projector);
  projection::save_projector(opt.out / "projector", r.weights);
  write_text(opt.out / "curve.csv", r.curve_csv());

  double fit_err = 0.0;
  for (float e : held.fit_error.data()) fit_err += e;
  fit_err /= static_cast<double>(held.size());
  const double proj_err = r.curve[r.best_epoch].heldout_vertex_err;
  const double ratio = fit_err > 0.0 ? proj_err / fit_err : 0.0;
  json rep{{"config", config_echo(cfg)},       {"train_pairs", train.size()},     {"heldout_pairs", held.size()},
           {"best_epoch", r.best_epoch},       {"projector_vertex_err", proj_err}, {"fit_vertex_err", fit_err},
           {"ratio", ratio}};
  write_text(opt.out / "report.json", rep.dump(2) + "\n");
  log << "train-projector: best epoch " << r.best_epoch << ", held-out error " << proj_err << " vs fit " << fit_err
      << " (ratio " << ratio << ")\n";
  return opt.max_ratio > 0.0 && ratio > opt.max_ratio ? kExitThreshold : kExitOk;
}

int train_denoiser(const RunConfig& cfg, const TrainDenoiserOptions& opt, std::ostream& log) {
  if (opt.frames == 0 || opt.heldout == 0) throw ConfigError("train-denoiser: frames and heldout must be positive");
  const numkit::Array clean = projection::sample_motion(opt.frames, opt.seed, cfg.motion);
  const projection::DenoiserTrainResult r = projection::train_denoiser(clean, cfg.denoiser);
  projection::save_denoiser(opt.out / "denoiser", r.denoiser);

  // Held-out frames from a different walk seed, noised like the training data.
  const numkit::Array held = projection::sample_motion(opt.heldout, opt.seed + 1, cfg.motion);
  std::mt19937_64 rng(opt.seed ^ 0x5a5aULL);
  std::normal_distribution<float> noise(0.0f, cfg.denoiser.noise_sigma);
  std::array<float, body::kBodyPoseDim> noisy{}, out{};
  double before = 0.0, after = 0.0;
  std::size_t closer = 0;
  for (std::size_t i = 0; i < opt.heldout; ++i) {
    double b = 0.0, a = 0.0;
    for (std::size_t k = 0; k < body::kBodyPoseDim; ++k) noisy[k] = held.at(i, k) + noise(rng);
    r.denoiser.denoise(noisy, out);
    for (std::size_t k = 0; k < body::kBodyPoseDim; ++k) {
      b += std::pow(noisy[k] - held.at(i, k), 2);
      a += std::pow(out[k] - held.at(i, k), 2);
    }
    before += b;
    after += a;
    closer += a < b ? 1 : 0;
  }
  const double per = static_cast<double>(opt.heldout * body::kBodyPoseDim);
  json rep{{"config", config_echo(cfg)},
           {"frames", opt.frames},
           {"seed", opt.seed},
           {"epoch_loss", r.epoch_loss},
           {"heldout_mse_noisy", before / per},
           {"heldout_mse_denoised", after / per},
           {"heldout_fraction_closer", static_cast<double>(closer) / static_cast<double>(opt.heldout)}};
  write_text(opt.out / "report.json", rep.dump(2) + "\n");
  log << "train-denoiser: held-out mse " << before / per << " -> " << after / per << ", " << closer << "/" << opt.heldout
      << " closer to clean\n";
  return kExitOk;
}

int run(const RunConfig& cfg, const RunOptions& opt, std::ostream& log) {
  if (opt.frames == 0) throw ConfigError("run: frames must be >= 1");
  const body::ToyModels m = body::make_toy_models(cfg.toy_seed);
  const decoder::FrozenModel model = decoder::make_model(cfg.model, cfg.model_seed);
  const priors::Scene scene = opt.scene ? priors::load_scene(*opt.scene) : priors::random_scene(cfg.scene_seed, cfg.image);
  const numkit::Array image = priors::render_scene(scene, m.mhr);
  const pipeline::PipelineConfig pcfg = cfg.pipeline_config(opt.mode);
  pipeline::Pipeline p(model, m.mhr, pcfg, scene.image);
  pipeline::RunResult r;
  for (std::size_t f = 0; f < opt.frames; ++f) p.run(scene, image, r);
  const std::string mode = opt.mode == Mode::serial ? "serial" : "fast";

  const pipeline::FrameCounters& c = r.counters;
  json result{{"config", config_echo(cfg)},
              {"mode", mode},
              {"pipeline", json::parse(pcfg.to_json())},
              {"scene", json::parse(priors::scene_to_json(scene))},
              {"merged", pose_json(r.merged)},
              {"camera", r.body.camera},
              {"counters",
               {{"encoder_calls", c.encoder_calls},
                {"encoder_batch", std::vector<std::size_t>(c.encoder_batch.begin(), c.encoder_batch.begin() + std::min(c.encoder_calls, pipeline::kMaxEncoderCalls))},
                {"body", counters_json(c.body)},
                {"hand", counters_json(c.hand)}}}};
  write_text(opt.out / "result.json", result.dump(2) + "\n");
  pipeline::LatencyReport lat = p.report();
  lat.mode = mode;
  json latency = json::parse(lat.to_json());
  latency["config"] = config_echo(cfg);
  write_text(opt.out / "latency.json", latency.dump(2) + "\n");

  if (opt.dump_intermediates) {
    json inter{{"body_box", box_json(r.body_box)},
               {"body_crop", box_json(r.body_crop)},
               {"hand_boxes", {box_json(r.hand_boxes[0]), box_json(r.hand_boxes[1])}},
               {"detector_score", r.detector_score},
               {"body", {{"params", pose_json(r.body.params)}, {"camera", r.body.camera}}},
               {"hands",
                {{{"params", pose_json(r.hands[0].params)}, {"camera", r.hands[0].camera}},
                 {{"params", pose_json(r.hands[1].params)}, {"camera", r.hands[1].camera}}}}};
    write_text(opt.out / "intermediates.json", inter.dump(2) + "\n");
    numkit::write_fsb1(opt.out / "image.fsb", image);
  }
  log << "run (" << mode << "): " << c.encoder_calls << " encoder calls, " << c.body.intermediate_predictions
      << " body intermediate predictions, " << lat.total_ms << " ms per frame over " << lat.frames << " frames\n";
  return kExitOk;
}

int bench(const RunConfig& cfg, const BenchCliOptions& opt, std::ostream& log) {
  const body::ToyModels m = body::make_toy_models(cfg.toy_seed);
  const decoder::FrozenModel model = decoder::make_model(cfg.model, cfg.model_seed);
  const std::vector<pipeline::BenchRow> rows =
      opt.matrix ? pipeline::parse_matrix(read_text(*opt.matrix), cfg.model) : pipeline::default_waterfall(cfg.model);
  const pipeline::BenchResult r = pipeline::bench(
      model, m.mhr, rows, {.frames = opt.frames, .warmup = opt.warmup, .scenes = opt.scenes, .seed = cfg.scene_seed});

  std::vector<pipeline::LatencyReport> reports;
  for (const auto& row : r.rows) reports.push_back(row.report);
  const ReportTable table = make_report(reports);
  log << table.text();
  const bool monotone = r.monotone(opt.band);
  log << "speedup " << r.speedup() << "x, waterfall " << (monotone ? "monotone" : "not monotone") << " within "
      << opt.band * 100.0 << "%\n";
  if (opt.csv) write_text(*opt.csv, r.csv());
  if (opt.json) {
    json j{{"config", config_echo(cfg)}, {"speedup", r.speedup()}, {"monotone", monotone}, {"reports", json::array()}};
    j["rows"] = json::array();
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      j["reports"].push_back(json::parse(r.rows[i].report.to_json()));
      j["rows"].push_back({{"toggle", r.rows[i].toggle},
                           {"cum_ms", r.rows[i].cum_ms},
                           {"delta_ms", r.rows[i].delta_ms},
                           {"config", json::parse(rows[i].config.to_json())}});
    }
    write_text(*opt.json, j.dump(2) + "\n");
  }
  const bool fail = opt.min_speedup > 0.0 && (r.speedup() < opt.min_speedup || !monotone);
  return fail ? kExitThreshold : kExitOk;
}

int bench_convert(const RunConfig& cfg, const BenchConvertOptions& opt, std::ostream& log) {
  const body::ToyModels m = body::make_toy_models(cfg.toy_seed);
  const projection::Bridge bridge = make_bridge(m, opt.bary);
  const projection::ProjectionDataset d = load_pairs(opt.data);
  const projection::ProjectorWeights w = projection::load_projector(opt.projector);
  std::optional<projection::Denoiser> den;
  if (opt.denoiser) den = projection::load_denoiser(*opt.denoiser);
  const projection::ConversionReport r = projection::bench_conversion(
      d, bridge, m.smpl, cfg.fit, w, den ? &*den : nullptr, {.meshes = opt.meshes, .forward_repeats = opt.repeats});
  if (opt.json) {
    json j = json::parse(r.to_json());
    j["config"] = config_echo(cfg);
    write_text(*opt.json, j.dump(2) + "\n");
  }
  log << "bench-convert: fit " << r.fit_ms << " ms, projector " << r.forward_ms << " ms, speedup " << r.speedup
      << "x; errors fit " << r.fit_error << ", projector " << r.projector_error << "\n";
  return opt.min_speedup > 0.0 && r.speedup < opt.min_speedup ? kExitThreshold : kExitOk;
}

int report(const ReportOptions& opt, std::ostream& log) {
  std::vector<pipeline::LatencyReport> all;
  for (const auto& p : opt.inputs) {
    auto r = load_reports(p);
    all.insert(all.end(), r.begin(), r.end());
  }
  const ReportTable t = make_report(all);
  log << t.text();
  if (opt.csv) write_text(*opt.csv, t.csv());
  if (opt.json) write_text(*opt.json, t.to_json() + "\n");
  return kExitOk;
}

}  // namespace fsb::cli
