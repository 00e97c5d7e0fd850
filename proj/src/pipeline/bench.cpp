#include "fsb/pipeline/bench.hpp"

#include <memory>
#include <sstream>

#include "detail/json_fields.hpp"
#include "fsb/error.hpp"

namespace fsb::pipeline {

std::vector<BenchRow> default_waterfall(const decoder::ModelConfig& m) {
  std::vector<BenchRow> rows;
  PipelineConfig c = PipelineConfig::serial(m);
  rows.push_back({"baseline", c});
  c.keypoint_prior = true;
  rows.push_back({"detector_stub", c});
  c.batch = BatchMode::full;
  c.crop = CropPrep::native;
  c.parallel_crops = true;
  rows.push_back({"batched_encode", c});
  c.body_layers = PipelineConfig::fast().body_layers;
  c.hand_layers = PipelineConfig::fast().hand_layers;
  rows.push_back({"gated_layers", c});
  c.refine = false;
  rows.push_back({"refinement_off", c});
  c.plan = PlanMode::fast_static;
  rows.push_back({"static_plan", c});
  c.consolidated = true;
  rows.push_back({"operator_consolidation", c});
  return rows;
}

std::vector<BenchRow> parse_matrix(const std::string& text, const decoder::ModelConfig& m) {
  const nlohmann::json j = fsb::detail::parse_json(text, "bench matrix");
  fsb::detail::reject_unknown(j, {"rows"}, "bench matrix");
  const auto& rows = j.contains("rows") ? j.at("rows") : throw ConfigError("bench matrix: missing field 'rows'");
  if (!rows.is_array() || rows.empty()) throw ConfigError("bench matrix: field 'rows' must be a non-empty array");
  std::vector<BenchRow> out;
  PipelineConfig c = PipelineConfig::serial(m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = "bench matrix.rows[" + std::to_string(i) + "]";
    fsb::detail::reject_unknown(rows[i], {"toggle", "config"}, where);
    const auto name = fsb::detail::field<std::string>(rows[i], "toggle", where);
    if (rows[i].contains("config")) c = PipelineConfig::from_json(rows[i].at("config").dump(), m, c);
    out.push_back({name, c});
  }
  return out;
}

double BenchResult::speedup() const {
  if (rows.size() < 2 || rows.back().cum_ms <= 0) return 1.0;
  return rows.front().cum_ms / rows.back().cum_ms;
}

bool BenchResult::monotone(double band) const {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].cum_ms > rows[i - 1].cum_ms * (1.0 + band)) return false;
  }
  return true;
}

std::string BenchResult::csv() const {
  std::ostringstream s;
  s << "toggle,cum_ms,delta_ms\n";
  for (const auto& r : rows) s << r.toggle << ',' << r.cum_ms << ',' << r.delta_ms << '\n';
  return s.str();
}

BenchResult bench(const decoder::FrozenModel& model, const body::BodyTemplate& mhr, const std::vector<BenchRow>& rows,
                  const BenchOptions& opt) {
  if (opt.frames == 0 || opt.frames <= opt.warmup) throw UsageError("bench: frames must exceed warmup");
  if (rows.empty()) throw UsageError("bench: no rows");
  const std::size_t n_scenes = std::max<std::size_t>(opt.scenes, 1);
  std::vector<priors::Scene> scenes;
  std::vector<numkit::Array> images;
  for (std::size_t i = 0; i < n_scenes; ++i) {
    scenes.push_back(priors::random_scene(opt.seed * 1000 + i));
    images.push_back(priors::render_scene(scenes.back(), mhr));
  }
  std::vector<std::unique_ptr<Pipeline>> pipes;
  for (const BenchRow& r : rows) pipes.push_back(std::make_unique<Pipeline>(model, mhr, r.config, scenes[0].image));

  std::vector<RunResult> results(rows.size());
  for (std::size_t f = 0; f < opt.frames; ++f) {
    if (f == opt.warmup) {
      for (auto& p : pipes) p->timers().clear();
    }
    const std::size_t s = f % n_scenes;
    for (std::size_t r = 0; r < rows.size(); ++r) pipes[r]->run(scenes[s], images[s], results[r]);
  }

  BenchResult out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    WaterfallRow w;
    w.toggle = rows[r].toggle;
    w.report = pipes[r]->report();
    w.report.mode = rows[r].toggle;
    w.cum_ms = w.report.total_p50_ms;
    w.delta_ms = r == 0 ? 0.0 : w.cum_ms - out.rows.back().cum_ms;
    out.rows.push_back(std::move(w));
  }
  return out;
}

}  // namespace fsb::pipeline
