#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsb/pipeline/pipeline.hpp"

namespace fsb::pipeline {

struct BenchRow {
  std::string toggle;
  PipelineConfig config;
};

// Serial baseline, then each optimization switched on in turn; the last row
// is the fast pathway.
std::vector<BenchRow> default_waterfall(const decoder::ModelConfig& m = {});

// {"rows": [{"toggle": name, "config": {...}}, ...]}. Each row's config is
// applied on top of the previous row's, starting from the serial preset.
std::vector<BenchRow> parse_matrix(const std::string& text, const decoder::ModelConfig& m = {});

struct BenchOptions {
  std::size_t frames = 100;
  std::size_t warmup = 10;
  std::size_t scenes = 8;  // distinct scenes cycled through
  std::uint64_t seed = 0;
};

struct WaterfallRow {
  std::string toggle;
  double cum_ms = 0;    // median per-frame latency with this and all earlier toggles
  double delta_ms = 0;  // change against the previous row
  LatencyReport report;
};

struct BenchResult {
  std::vector<WaterfallRow> rows;

  double speedup() const;  // first row over last row
  // Every row within band (relative) of the previous row or below it.
  bool monotone(double band) const;
  std::string csv() const;
};

// Frames are interleaved across rows, so slow drifts of the machine land on
// every row alike. Scene images are rendered before timing starts.
BenchResult bench(const decoder::FrozenModel& model, const body::BodyTemplate& mhr, const std::vector<BenchRow>& rows,
                  const BenchOptions& opt = {});

}  // namespace fsb::pipeline
