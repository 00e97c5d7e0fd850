#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fsb/pipeline/latency.hpp"

namespace fsb::cli {

// A report file holds either one latency report or {"reports": [...]}.
// ConfigError naming the file and the offending field otherwise.
std::vector<pipeline::LatencyReport> load_reports(const std::filesystem::path& path);

struct ReportRow {
  std::string name;
  std::uint64_t frames = 0;
  double total_ms = 0, p50_ms = 0, p95_ms = 0;
  std::vector<std::optional<double>> stage_ms;  // mean, parallel to ReportTable::stages
  std::optional<double> speedup;                // first row's p50 over this row's, rounded to 2 decimals
};

struct ReportTable {
  std::vector<std::string> stages;  // every stage seen, in pipeline order
  std::vector<ReportRow> rows;

  // Columns: name, frames, total_ms, p50_ms, p95_ms, <stage>_ms..., then
  // speedup when there are at least two rows.
  std::vector<std::string> columns() const;
  std::string text() const;
  std::string csv() const;
  std::string to_json() const;
};

ReportTable make_report(const std::vector<pipeline::LatencyReport>& reports);

}  // namespace fsb::cli
