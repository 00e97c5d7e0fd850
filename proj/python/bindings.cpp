#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/bodymodel/pose_sampler.hpp"
#include "fsb/bodymodel/toy_models.hpp"
#include "fsb/cli/run_config.hpp"
#include "fsb/decoder/weights.hpp"
#include "fsb/error.hpp"
#include "fsb/pipeline/bench.hpp"
#include "fsb/pipeline/pipeline.hpp"
#include "fsb/priors/scene.hpp"
#include "fsb/projection/bridge.hpp"
#include "fsb/projection/fit.hpp"

namespace py = pybind11;
using namespace fsb;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

FloatArray to_numpy(std::span<const float> v, std::vector<py::ssize_t> shape) {
  FloatArray out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

FloatArray to_numpy(const numkit::Array& a) {
  return to_numpy(a.data(), std::vector<py::ssize_t>(a.shape().begin(), a.shape().end()));
}

std::span<const float> view(const FloatArray& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

body::PoseState pose_from(const FloatArray& a) {
  if (a.size() != static_cast<py::ssize_t>(body::kPoseDim)) {
    throw ShapeError("pose: expected " + std::to_string(body::kPoseDim) + " values, got " + std::to_string(a.size()));
  }
  body::PoseState p;
  std::copy_n(a.data(), body::kPoseDim, p.values.begin());
  return p;
}

FloatArray pose_to(const body::PoseState& p) { return to_numpy(p.values, {static_cast<py::ssize_t>(body::kPoseDim)}); }

// The toy pair plus the computed correspondence between them.
struct Models {
  explicit Models(std::uint64_t seed)
      : toy(body::make_toy_models(seed)), bridge(projection::precompute_bary(toy.mhr, toy.smpl).map, toy.mhr) {}

  const body::BodyTemplate& get(const std::string& name) const {
    if (name == "mhr") return toy.mhr;
    if (name == "smpl") return toy.smpl;
    throw ConfigError("template: expected 'mhr' or 'smpl', got '" + name + "'");
  }

  body::ToyModels toy;
  projection::Bridge bridge;
};

FloatArray skin(const Models& m, const std::string& name, const FloatArray& pose, bool correctives) {
  const body::BodyTemplate& t = m.get(name);
  const body::PoseState p = pose_from(pose);
  std::vector<float> v(3 * t.num_vertices());
  body::skin(t, p, body::forward_kinematics(t, p), {.correctives = correctives, .sparse_weights = true}, v);
  return to_numpy(v, {static_cast<py::ssize_t>(t.num_vertices()), 3});
}

FloatArray bridge_apply(const Models& m, const FloatArray& source) {
  std::vector<float> out(3 * m.bridge.target_vertices());
  m.bridge.apply(view(source), out);
  return to_numpy(out, {static_cast<py::ssize_t>(m.bridge.target_vertices()), 3});
}

py::dict fit(const Models& m, const FloatArray& source, const std::string& config_json) {
  const projection::FitConfig cfg = projection::FitConfig::from_json(config_json);
  const projection::FitResult r = projection::iterative_fit(view(source), m.bridge, m.toy.smpl, cfg);
  py::dict d;
  d["pose"] = pose_to(r.pose);
  d["vertex_error"] = r.vertex_error;
  d["best_step"] = r.best_step;
  return d;
}

py::dict decode_json(const decoder::DecodeResult& r) {
  py::dict d;
  d["params"] = pose_to(r.params);
  d["camera"] = std::vector<float>(r.camera.begin(), r.camera.end());
  return d;
}

// One pipeline run on a scene given as JSON, or a random scene from the config's scene_seed.
py::dict run(const std::string& config_json, const std::string& mode, const std::string& scene_json, std::size_t frames) {
  if (frames == 0) throw ConfigError("run: frames must be >= 1");
  const cli::RunConfig cfg = cli::RunConfig::from_json(config_json);
  cfg.validate();
  const body::ToyModels m = body::make_toy_models(cfg.toy_seed);
  const decoder::FrozenModel model = decoder::make_model(cfg.model, cfg.model_seed);
  const priors::Scene scene =
      scene_json.empty() ? priors::random_scene(cfg.scene_seed, cfg.image) : priors::scene_from_json(scene_json);
  const numkit::Array image = priors::render_scene(scene, m.mhr);
  pipeline::Pipeline p(model, m.mhr, cfg.pipeline_config(cli::parse_mode(mode)), scene.image);
  pipeline::RunResult r;
  {
    py::gil_scoped_release release;
    for (std::size_t f = 0; f < frames; ++f) p.run(scene, image, r);
  }
  const pipeline::FrameCounters& c = r.counters;
  py::dict d;
  d["merged"] = pose_to(r.merged);
  d["body"] = decode_json(r.body);
  d["hands"] = py::make_tuple(decode_json(r.hands[0]), decode_json(r.hands[1]));
  d["encoder_calls"] = c.encoder_calls;
  d["encoder_batch"] =
      std::vector<std::size_t>(c.encoder_batch.begin(), c.encoder_batch.begin() + std::min(c.encoder_calls, pipeline::kMaxEncoderCalls));
  d["body_intermediate_predictions"] = c.body.intermediate_predictions;
  d["latency"] = py::module_::import("json").attr("loads")(p.report().to_json());
  return d;
}

py::dict bench(std::size_t frames, std::size_t warmup, std::size_t scenes, std::uint64_t seed) {
  const body::ToyModels m = body::make_toy_models(7);
  const decoder::FrozenModel model = decoder::make_model({}, 3);
  pipeline::BenchResult r;
  {
    py::gil_scoped_release release;
    r = pipeline::bench(model, m.mhr, pipeline::default_waterfall(),
                        {.frames = frames, .warmup = warmup, .scenes = scenes, .seed = seed});
  }
  py::list rows;
  for (const auto& row : r.rows) rows.append(py::make_tuple(row.toggle, row.cum_ms));
  py::dict d;
  d["rows"] = rows;
  d["speedup"] = r.speedup();
  d["monotone"] = r.monotone(0.05);
  return d;
}

}  // namespace

PYBIND11_MODULE(_fsb, m) {
  m.doc() = "Toy body-mesh pipelines, kinematic conversion and benchmarks.";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<ProjectionError>(m, "ProjectionError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.attr("POSE_DIM") = body::kPoseDim;

  py::class_<Models>(m, "Models")
      .def(py::init<std::uint64_t>(), py::arg("seed") = 7)
      .def("rest_vertices", [](const Models& s, const std::string& name) { return to_numpy(s.get(name).vertices_rest); },
           py::arg("template"))
      .def("faces",
           [](const Models& s, const std::string& name) {
             const auto& f = s.get(name).faces;
             py::array_t<std::uint32_t> out({static_cast<py::ssize_t>(f.size()), py::ssize_t{3}});
             std::copy_n(f.data()->data(), 3 * f.size(), out.mutable_data());
             return out;
           },
           py::arg("template"))
      .def("skin", &skin, py::arg("template"), py::arg("pose"), py::arg("correctives") = true)
      .def("bridge", &bridge_apply, py::arg("source"), "Source-topology vertices mapped onto the target topology.")
      .def("fit", &fit, py::arg("source"), py::arg("config") = "{}",
           "Iterative fit of target-model parameters to a source-topology mesh.");

  m.def("sample_pose", [](std::uint64_t seed) { return pose_to(body::sample_pose(seed)); }, py::arg("seed"));
  m.def("random_scene", [](std::uint64_t seed) { return priors::scene_to_json(priors::random_scene(seed)); }, py::arg("seed"));
  m.def("default_config", [] { return cli::RunConfig{}.to_json(); }, "Complete default run configuration as JSON.");
  m.def("run", &run, py::arg("config") = "{}", py::arg("mode") = "fast", py::arg("scene") = "", py::arg("frames") = 1);
  m.def("bench", &bench, py::arg("frames") = 20, py::arg("warmup") = 3, py::arg("scenes") = 4, py::arg("seed") = 0,
        "Latency waterfall from the serial reference to the fully optimized pathway.");
}
