#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace fsb::pipeline {

enum class Stage : std::size_t { detect, crop, encode, body_decode, hand_boxes, hand_decode, merge, refine, count };
inline constexpr std::size_t kNumStages = static_cast<std::size_t>(Stage::count);

const char* stage_name(Stage s);

struct StageStats {
  std::string name;
  double mean_ms = 0, p50_ms = 0, p95_ms = 0;
  std::uint64_t calls = 0;
};

struct LatencyReport {
  std::string mode;
  std::vector<StageStats> stages;
  double total_ms = 0;  // mean end-to-end per frame
  double total_p50_ms = 0;
  double total_p95_ms = 0;
  std::uint64_t frames = 0;

  std::string to_json() const;
  static LatencyReport from_json(const std::string& text);  // ConfigError naming the offending field
};

// Per-stage wall-clock accumulation over frames. Sample storage is reserved
// up front so recording never allocates.
class StageTimers {
 public:
  using Clock = std::chrono::steady_clock;

  explicit StageTimers(std::size_t max_frames = 4096);

  void begin_frame();
  void add(Stage s, Clock::duration d);
  void end_frame(Clock::duration total);
  void clear();

  std::uint64_t frames() const { return frame_totals_.size(); }
  LatencyReport report(const std::string& mode) const;

 private:
  std::size_t max_frames_;
  std::array<std::vector<double>, kNumStages> samples_;  // per frame, ms
  std::array<std::uint64_t, kNumStages> calls_{};
  std::array<double, kNumStages> frame_acc_{};
  std::array<bool, kNumStages> frame_seen_{};
  std::vector<double> frame_totals_;
};

// Times a scope into one stage.
class ScopedStage {
 public:
  ScopedStage(StageTimers* t, Stage s) : timers_(t), stage_(s), start_(StageTimers::Clock::now()) {}
  ~ScopedStage() {
    if (timers_ != nullptr) timers_->add(stage_, StageTimers::Clock::now() - start_);
  }
  ScopedStage(const ScopedStage&) = delete;
  ScopedStage& operator=(const ScopedStage&) = delete;

 private:
  StageTimers* timers_;
  Stage stage_;
  StageTimers::Clock::time_point start_;
};

}  // namespace fsb::pipeline
