#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include "fsb/cli/run_config.hpp"

namespace fsb::cli {

namespace fs = std::filesystem;

// Exit statuses shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // I/O and anything unexpected
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitThreshold = 4;

// Each command writes its outputs under explicit paths, logs a short summary
// to log, and returns kExitOk or kExitThreshold. Errors are thrown.

// out/config.json, out/scenes/scene_<i>.json, out/pairs/ (projection dataset:
// source meshes, fitted parameters, fit errors).
struct SynthOptions {
  std::size_t n = 1;
  std::uint64_t seed = 0;
  fs::path out;
  std::optional<fs::path> bary;  // default: computed from the toy models
};
int synth(const RunConfig& cfg, const SynthOptions& opt, std::ostream& log);

// out/ (bary bundle), out/diagnostics.json
int precompute_bary(const RunConfig& cfg, const fs::path& out, std::ostream& log);

// Refits every pair of a synth dataset. out/fit.json, out/params/,
// out/timing.json. Threshold: fraction of fits within max_error.
struct FitOptions {
  fs::path data;
  fs::path out;
  std::optional<fs::path> bary;
  double max_error = 1e-2;
  double min_fraction = 0.0;
};
int fit(const RunConfig& cfg, const FitOptions& opt, std::ostream& log);

// out/projector/, out/curve.csv, out/report.json. Threshold: held-out
// projector error over the fit error on the same meshes.
struct TrainProjectorOptions {
  fs::path data;
  std::optional<fs::path> heldout_data;  // default: split data
  std::size_t heldout = 0;               // rows split off data; 0 means a tenth
  fs::path out;
  std::optional<fs::path> bary;
  double max_ratio = 0.0;  // 0: no threshold
};
int train_projector(const RunConfig& cfg, const TrainProjectorOptions& opt, std::ostream& log);

// out/denoiser/, out/report.json
struct TrainDenoiserOptions {
  std::size_t frames = 20000;
  std::size_t heldout = 500;
  std::uint64_t seed = 1;
  fs::path out;
};
int train_denoiser(const RunConfig& cfg, const TrainDenoiserOptions& opt, std::ostream& log);

// out/result.json (parameters and counters), out/latency.json, and with
// dump_intermediates out/intermediates.json plus out/image.fsb.
struct RunOptions {
  Mode mode = Mode::fast;
  std::optional<fs::path> scene;  // default: random scene from cfg.scene_seed
  std::size_t frames = 1;
  fs::path out;
  bool dump_intermediates = false;
};
int run(const RunConfig& cfg, const RunOptions& opt, std::ostream& log);

// Latency waterfall. Threshold: first-over-last speedup and monotonicity.
struct BenchCliOptions {
  std::optional<fs::path> matrix;  // default: the built-in waterfall
  std::size_t frames = 100;
  std::size_t warmup = 10;
  std::size_t scenes = 8;
  std::optional<fs::path> csv;
  std::optional<fs::path> json;
  double min_speedup = 0.0;  // 0: no threshold
  double band = 0.05;
};
int bench(const RunConfig& cfg, const BenchCliOptions& opt, std::ostream& log);

// Fit versus projector timing on the pairs of a synth dataset.
struct BenchConvertOptions {
  fs::path data;
  fs::path projector;
  std::optional<fs::path> denoiser;
  std::optional<fs::path> bary;
  std::size_t meshes = 20;
  std::size_t repeats = 200;
  std::optional<fs::path> json;
  double min_speedup = 0.0;
};
int bench_convert(const RunConfig& cfg, const BenchConvertOptions& opt, std::ostream& log);

struct ReportOptions {
  std::vector<fs::path> inputs;
  std::optional<fs::path> csv;
  std::optional<fs::path> json;
};
int report(const ReportOptions& opt, std::ostream& log);

}  // namespace fsb::cli
