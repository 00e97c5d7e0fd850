#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/bodymodel/toy_models.hpp"
#include "fsb/cli/commands.hpp"
#include "fsb/cli/report.hpp"
#include "fsb/error.hpp"
#include "fsb/projection/bridge.hpp"

using namespace fsb;
using namespace fsb::cli;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("fsb_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

pipeline::LatencyReport latency(const std::string& mode, double total, std::vector<pipeline::StageStats> stages) {
  pipeline::LatencyReport r;
  r.mode = mode;
  r.frames = 10;
  r.total_ms = total;
  r.total_p50_ms = total;
  r.total_p95_ms = total * 1.1;
  r.stages = std::move(stages);
  return r;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

TEST_CASE("run config") {
  SUBCASE("defaults round trip") {
    const RunConfig c;
    CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());
    CHECK(RunConfig::from_json("{}").to_json() == c.to_json());
  }

  SUBCASE("sections override defaults") {
    const RunConfig c = RunConfig::from_json(R"({
      "model": {"body_layers": 3},
      "image": [128, 96],
      "pipeline": {"batch": "hand_batch", "body_layers": [0, 2]},
      "fit": {"steps": 40},
      "train": {"epochs": 7},
      "projector": {"subsample": 64}
    })");
    CHECK(c.model.body_layers == 3);
    CHECK(c.image.width == 128);
    CHECK(c.image.height == 96);
    CHECK(c.fit.steps == 40);
    CHECK(c.train.epochs == 7);
    CHECK(c.projector.subsample == 64);
    const auto fast = c.pipeline_config(Mode::fast);
    CHECK(fast.batch == pipeline::BatchMode::hands);
    CHECK(fast.body_layers == decoder::LayerSelection{0, 2});
    const auto serial = c.pipeline_config(Mode::serial);
    CHECK_FALSE(serial.keypoint_prior);
    CHECK(serial.batch == pipeline::BatchMode::hands);
    CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());
  }

  SUBCASE("errors name the offending field") {
    auto message = [](const std::string& text) {
      try {
        RunConfig::from_json(text);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string("no error");
    };
    CHECK(message(R"({"seeds": 1})").find("'seeds'") != std::string::npos);
    CHECK(message(R"({"model": {"depth": 2}})").find("'depth'") != std::string::npos);
    CHECK(message(R"({"fit": {"steps": "many"}})").find("'steps'") != std::string::npos);
    CHECK(message(R"({"pipeline": {"turbo": true}})").find("'turbo'") != std::string::npos);
    CHECK(message(R"({"model": {"body_layers": 2}, "pipeline": {"body_layers": [0, 5]}})").find("layer 5") !=
          std::string::npos);
    CHECK(message(R"({"model": {"crop_size": 60}})").find("config.model") != std::string::npos);
    CHECK(message(R"({"image": [64]})").find("'image'") != std::string::npos);
    CHECK(message("[1, 2]").find("expected an object") != std::string::npos);
    CHECK_THROWS_AS(parse_mode("both"), ConfigError);
  }
}

TEST_CASE("report tables") {
  const auto a = latency("serial", 40.0, {{"detect", 10.0, 10.0, 11.0, 10}, {"encode", 20.0, 20.0, 21.0, 30}});
  const auto b = latency("fast", 12.5, {{"encode", 8.0, 8.0, 9.0, 10}, {"crop", 1.25, 1.2, 1.3, 10}});

  SUBCASE("a single report passes through") {
    const ReportTable t = make_report({a});
    CHECK(t.columns() == std::vector<std::string>{"name", "frames", "total_ms", "p50_ms", "p95_ms", "detect_ms", "encode_ms"});
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].total_ms == 40.0);
    CHECK_FALSE(t.rows[0].speedup.has_value());
  }

  SUBCASE("two reports add a speedup column") {
    const ReportTable t = make_report({a, b});
    const auto cols = t.columns();
    CHECK(cols.back() == "speedup");
    // stages in pipeline order, crop before encode
    CHECK(t.stages == std::vector<std::string>{"detect", "crop", "encode"});
    CHECK(*t.rows[0].speedup == 1.0);
    CHECK(*t.rows[1].speedup == 3.2);
    CHECK(t.text().find("3.20") != std::string::npos);
    CHECK_FALSE(t.rows[1].stage_ms[0].has_value());
  }

  SUBCASE("JSON to CSV keeps values to 1e-3 ms") {
    auto odd = latency("odd", 17.123456789, {{"merge", 0.000123456, 0.0001, 0.0002, 4}});
    const auto back = pipeline::LatencyReport::from_json(odd.to_json());
    const ReportTable t = make_report({a, back});
    std::istringstream csv(t.csv());
    std::string header, row0, row1;
    std::getline(csv, header);
    std::getline(csv, row0);
    std::getline(csv, row1);
    const auto h = split(header, ','), r = split(row1, ',');
    REQUIRE(h.size() == r.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (h[i] == "total_ms") CHECK(std::fabs(std::stod(r[i]) - 17.123456789) <= 1e-3);
      if (h[i] == "merge_ms") CHECK(std::fabs(std::stod(r[i]) - 0.000123456) <= 1e-3);
      if (h[i] == "detect_ms") CHECK(r[i].empty());
    }
  }

  SUBCASE("files: single, bundled, and malformed") {
    const fs::path dir = scratch("report");
    std::ofstream(dir / "one.json") << a.to_json();
    nlohmann::json bundle{{"reports", {nlohmann::json::parse(a.to_json()), nlohmann::json::parse(b.to_json())}}};
    std::ofstream(dir / "many.json") << bundle.dump();
    std::ofstream(dir / "bad.json") << R"({"mode": "x", "stages": []})";
    std::ofstream(dir / "bad_stage.json") << R"({"mode": "x", "total_ms": 1, "stages": [{"name": "crop"}]})";
    CHECK(load_reports(dir / "one.json").size() == 1);
    CHECK(load_reports(dir / "many.json").size() == 2);
    auto message = [&](const char* f) {
      try {
        load_reports(dir / f);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string("no error");
    };
    CHECK(message("bad.json").find("'total_ms'") != std::string::npos);
    CHECK(message("bad_stage.json").find("stages[0]") != std::string::npos);
    CHECK_THROWS_AS(load_reports(dir / "missing.json"), IoError);
    fs::remove_all(dir);
  }
}

TEST_CASE("synth") {
  RunConfig cfg;
  const fs::path dir = scratch("synth");
  std::ostringstream log;
  CHECK(synth(cfg, {.n = 1, .seed = 5, .out = dir / "a", .bary = std::nullopt}, log) == kExitOk);
  CHECK(fs::exists(dir / "a" / "scenes" / "scene_00000.json"));
  CHECK_FALSE(fs::exists(dir / "a" / "scenes" / "scene_00001.json"));
  const projection::ProjectionDataset d = projection::load_dataset(dir / "a" / "pairs");
  REQUIRE(d.size() == 1);

  // Re-verify the stored parameters against the bridged mesh.
  const body::ToyModels m = body::make_toy_models(cfg.toy_seed);
  const projection::Bridge b(projection::precompute_bary(m.mhr, m.smpl).map, m.mhr);
  std::vector<float> goal(3 * m.smpl.num_vertices()), verts(goal.size());
  b.apply(d.source.data(), goal);
  body::PoseState p;
  std::copy_n(d.params.data().begin(), body::kPoseDim, p.values.begin());
  body::skin(m.smpl, p, body::forward_kinematics(m.smpl, p), projection::kFitSkin, verts);
  double err = 0.0;
  for (std::size_t v = 0; v < m.smpl.num_vertices(); ++v) {
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) d2 += std::pow(verts[3 * v + c] - goal[3 * v + c], 2);
    err += std::sqrt(d2);
  }
  err /= static_cast<double>(m.smpl.num_vertices());
  CHECK(err <= 1e-2);
  CHECK(err == doctest::Approx(d.fit_error[0]).epsilon(1e-4));

  CHECK(synth(cfg, {.n = 1, .seed = 5, .out = dir / "b", .bary = std::nullopt}, log) == kExitOk);
  for (const char* f : {"config.json", "pairs/source.fsb", "pairs/params.fsb", "scenes/scene_00000.json"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK_THROWS_AS(synth(cfg, {.n = 0, .out = dir / "c", .bary = std::nullopt}, log), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("run outputs are deterministic apart from timing") {
  const fs::path dir = scratch("run");
  std::ostringstream log;
  const RunConfig cfg;
  for (const char* sub : {"a", "b"}) {
    CHECK(run(cfg, {.mode = Mode::fast, .scene = std::nullopt, .frames = 1, .out = dir / sub, .dump_intermediates = true}, log) == kExitOk);
  }
  CHECK(slurp(dir / "a" / "result.json") == slurp(dir / "b" / "result.json"));
  CHECK(slurp(dir / "a" / "intermediates.json") == slurp(dir / "b" / "intermediates.json"));
  const auto result = nlohmann::json::parse(slurp(dir / "a" / "result.json"));
  CHECK(result.at("counters").at("encoder_calls") == 1);
  CHECK(result.at("counters").at("encoder_batch") == std::vector<int>{3});
  CHECK(result.at("config") == nlohmann::json::parse(cfg.to_json()));
  const auto lat = pipeline::LatencyReport::from_json(slurp(dir / "a" / "latency.json"));
  CHECK(lat.mode == "fast");

  CHECK(run(cfg, {.mode = Mode::serial, .scene = std::nullopt, .frames = 1, .out = dir / "s", .dump_intermediates = false}, log) == kExitOk);
  const auto serial = nlohmann::json::parse(slurp(dir / "s" / "result.json"));
  CHECK(serial.at("counters").at("encoder_calls") == 3);
  fs::remove_all(dir);
}
