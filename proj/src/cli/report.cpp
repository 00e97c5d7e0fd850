#include "fsb/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fsb/error.hpp"

namespace fsb::cli {
namespace {

std::string fixed(double v, int decimals) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << v;
  return s.str();
}

}  // namespace

std::vector<pipeline::LatencyReport> load_reports(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError(path.string() + ": cannot open report");
  std::ostringstream text;
  text << f.rdbuf();
  const std::string where = path.string();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": invalid JSON: " + e.what());
  }
  std::vector<pipeline::LatencyReport> out;
  try {
    if (j.is_object() && j.contains("reports")) {
      if (!j.at("reports").is_array()) throw ConfigError("field 'reports' must be an array");
      for (const auto& r : j.at("reports")) out.push_back(pipeline::LatencyReport::from_json(r.dump()));
    } else {
      out.push_back(pipeline::LatencyReport::from_json(j.dump()));
    }
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return out;
}

ReportTable make_report(const std::vector<pipeline::LatencyReport>& reports) {
  if (reports.empty()) throw UsageError("report: no inputs");
  ReportTable t;
  for (std::size_t i = 0; i < pipeline::kNumStages; ++i) {
    const std::string name = pipeline::stage_name(static_cast<pipeline::Stage>(i));
    const bool seen = std::any_of(reports.begin(), reports.end(), [&](const auto& r) {
      return std::any_of(r.stages.begin(), r.stages.end(), [&](const auto& s) { return s.name == name; });
    });
    if (seen) t.stages.push_back(name);
  }
  for (const auto& r : reports) {
    for (const auto& s : r.stages) {
      if (std::find(t.stages.begin(), t.stages.end(), s.name) == t.stages.end()) t.stages.push_back(s.name);
    }
  }
  const double base = reports.front().total_p50_ms;
  for (const auto& r : reports) {
    ReportRow row{r.mode, r.frames, r.total_ms, r.total_p50_ms, r.total_p95_ms, {}, {}};
    for (const auto& name : t.stages) {
      auto it = std::find_if(r.stages.begin(), r.stages.end(), [&](const auto& s) { return s.name == name; });
      row.stage_ms.push_back(it == r.stages.end() ? std::nullopt : std::optional<double>(it->mean_ms));
    }
    if (reports.size() > 1 && r.total_p50_ms > 0.0) row.speedup = std::round(base / r.total_p50_ms * 100.0) / 100.0;
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::string> ReportTable::columns() const {
  std::vector<std::string> c{"name", "frames", "total_ms", "p50_ms", "p95_ms"};
  for (const auto& s : stages) c.push_back(s + "_ms");
  if (rows.size() > 1) c.push_back("speedup");
  return c;
}

namespace {

std::vector<std::string> cells(const ReportTable& t, const ReportRow& r, int decimals) {
  std::vector<std::string> c{r.name, std::to_string(r.frames), fixed(r.total_ms, decimals), fixed(r.p50_ms, decimals),
                             fixed(r.p95_ms, decimals)};
  for (const auto& v : r.stage_ms) c.push_back(v ? fixed(*v, decimals) : "");
  if (t.rows.size() > 1) c.push_back(r.speedup ? fixed(*r.speedup, 2) : "");
  return c;
}

}  // namespace

std::string ReportTable::text() const {
  const auto head = columns();
  std::vector<std::vector<std::string>> body;
  for (const auto& r : rows) body.push_back(cells(*this, r, 3));
  std::vector<std::size_t> width(head.size());
  for (std::size_t i = 0; i < head.size(); ++i) {
    width[i] = head[i].size();
    for (const auto& b : body) width[i] = std::max(width[i], b[i].size());
  }
  std::ostringstream s;
  auto line = [&](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i == 0) {
        s << std::left << std::setw(static_cast<int>(width[i])) << v[i];
      } else {
        s << "  " << std::right << std::setw(static_cast<int>(width[i])) << v[i];
      }
    }
    s << '\n';
  };
  line(head);
  for (const auto& b : body) line(b);
  return s.str();
}

std::string ReportTable::csv() const {
  std::ostringstream s;
  const auto head = columns();
  for (std::size_t i = 0; i < head.size(); ++i) s << (i ? "," : "") << head[i];
  s << '\n';
  for (const auto& r : rows) {
    const auto c = cells(*this, r, 6);
    for (std::size_t i = 0; i < c.size(); ++i) s << (i ? "," : "") << c[i];
    s << '\n';
  }
  return s.str();
}

std::string ReportTable::to_json() const {
  nlohmann::json j;
  j["columns"] = columns();
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row{{"name", r.name}, {"frames", r.frames}, {"total_ms", r.total_ms}, {"p50_ms", r.p50_ms}, {"p95_ms", r.p95_ms}};
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (r.stage_ms[i]) row[stages[i] + "_ms"] = *r.stage_ms[i];
    }
    if (r.speedup) row["speedup"] = *r.speedup;
    j["rows"].push_back(row);
  }
  return j.dump(2);
}

}  // namespace fsb::cli
