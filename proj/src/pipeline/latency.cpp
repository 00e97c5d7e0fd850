#include "fsb/pipeline/latency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "fsb/error.hpp"

namespace fsb::pipeline {
namespace {

constexpr std::array<const char*, kNumStages> kNames{"detect",     "crop",        "encode", "body_decode",
                                                     "hand_boxes", "hand_decode", "merge",  "refine"};

double ms(StageTimers::Clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); }

// Nearest-rank percentile.
double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

const char* stage_name(Stage s) { return kNames[static_cast<std::size_t>(s)]; }

StageTimers::StageTimers(std::size_t max_frames) : max_frames_(max_frames) {
  for (auto& s : samples_) s.reserve(max_frames);
  frame_totals_.reserve(max_frames);
}

void StageTimers::begin_frame() {
  frame_acc_.fill(0.0);
  frame_seen_.fill(false);
}

void StageTimers::add(Stage s, Clock::duration d) {
  const auto i = static_cast<std::size_t>(s);
  frame_acc_[i] += ms(d);
  frame_seen_[i] = true;
  ++calls_[i];
}

void StageTimers::end_frame(Clock::duration total) {
  if (frame_totals_.size() >= max_frames_) return;  // full: keep the first max_frames
  for (std::size_t i = 0; i < kNumStages; ++i) {
    if (frame_seen_[i]) samples_[i].push_back(frame_acc_[i]);
  }
  frame_totals_.push_back(ms(total));
}

void StageTimers::clear() {
  for (auto& s : samples_) s.clear();
  calls_.fill(0);
  frame_totals_.clear();
}

LatencyReport StageTimers::report(const std::string& mode) const {
  LatencyReport r;
  r.mode = mode;
  r.frames = frame_totals_.size();
  for (std::size_t i = 0; i < kNumStages; ++i) {
    if (samples_[i].empty()) continue;
    r.stages.push_back({kNames[i], mean(samples_[i]), percentile(samples_[i], 0.5), percentile(samples_[i], 0.95),
                        calls_[i]});
  }
  r.total_ms = mean(frame_totals_);
  r.total_p50_ms = percentile(frame_totals_, 0.5);
  r.total_p95_ms = percentile(frame_totals_, 0.95);
  return r;
}

std::string LatencyReport::to_json() const {
  nlohmann::json j;
  j["mode"] = mode;
  j["frames"] = frames;
  j["total_ms"] = total_ms;
  j["total_p50_ms"] = total_p50_ms;
  j["total_p95_ms"] = total_p95_ms;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : stages) {
    j["stages"].push_back({{"name", s.name}, {"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms}, {"p95_ms", s.p95_ms}, {"calls", s.calls}});
  }
  return j.dump(2);
}

LatencyReport LatencyReport::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("latency report: invalid JSON: ") + e.what());
  }
  auto need = [](const nlohmann::json& o, const char* key, const std::string& where) -> const nlohmann::json& {
    if (!o.is_object() || !o.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    return o.at(key);
  };
  auto num = [&](const nlohmann::json& o, const char* key, const std::string& where) {
    const auto& v = need(o, key, where);
    if (!v.is_number()) throw ConfigError(where + ": field '" + key + "' must be a number");
    return v.get<double>();
  };
  LatencyReport r;
  const auto& mode = need(j, "mode", "report");
  if (!mode.is_string()) throw ConfigError("report: field 'mode' must be a string");
  r.mode = mode.get<std::string>();
  r.total_ms = num(j, "total_ms", "report");
  r.total_p50_ms = j.contains("total_p50_ms") ? num(j, "total_p50_ms", "report") : r.total_ms;
  r.total_p95_ms = j.contains("total_p95_ms") ? num(j, "total_p95_ms", "report") : r.total_ms;
  r.frames = j.contains("frames") ? static_cast<std::uint64_t>(num(j, "frames", "report")) : 0;
  const auto& stages = need(j, "stages", "report");
  if (!stages.is_array()) throw ConfigError("report: field 'stages' must be an array");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string where = "report.stages[" + std::to_string(i) + "]";
    const auto& s = stages[i];
    const auto& name = need(s, "name", where);
    if (!name.is_string()) throw ConfigError(where + ": field 'name' must be a string");
    r.stages.push_back({name.get<std::string>(), num(s, "mean_ms", where), num(s, "p50_ms", where),
                        num(s, "p95_ms", where), static_cast<std::uint64_t>(num(s, "calls", where))});
  }
  return r;
}

}  // namespace fsb::pipeline
