#include "fsb/projection/bench.hpp"

#include <algorithm>
#include <chrono>

#include <nlohmann/json.hpp>

#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/error.hpp"

namespace fsb::projection {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::string ConversionReport::to_json() const {
  nlohmann::json j{{"meshes", meshes},         {"fit_steps", fit_steps},         {"fit_ms", fit_ms},
                   {"forward_ms", forward_ms}, {"denoise_ms", denoise_ms},       {"speedup", speedup},
                   {"fit_error", fit_error},   {"projector_error", projector_error}};
  return j.dump(2);
}

ConversionReport bench_conversion(const ProjectionDataset& test, const Bridge& bridge, const body::BodyTemplate& target,
                                  const FitConfig& fit, const ProjectorWeights& projector, const Denoiser* denoiser,
                                  const ConversionBenchOptions& opt) {
  test.validate();
  const std::size_t n = std::min(opt.meshes, test.size());
  if (n == 0) throw ConfigError("bench-convert: no test meshes");
  if (opt.forward_repeats == 0) throw ConfigError("bench-convert: forward_repeats must be positive");
  const std::size_t ns = test.source.dim(1);

  Projector proj(bridge, projector);
  std::vector<float> goal(3 * bridge.target_vertices()), verts(3 * target.num_vertices());
  std::vector<double> fit_ms, fwd_ms, den_ms;
  ConversionReport r;
  r.meshes = n;
  r.fit_steps = fit.steps;
  body::PoseState out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto mesh = test.source.data().subspan(i * ns, ns);

    auto t0 = Clock::now();
    const FitResult f = iterative_fit(mesh, bridge, target, fit);
    fit_ms.push_back(ms_since(t0));
    r.fit_error += f.vertex_error;

    proj.forward(mesh, out);  // warm caches
    t0 = Clock::now();
    for (std::size_t k = 0; k < opt.forward_repeats; ++k) proj.forward(mesh, out);
    fwd_ms.push_back(ms_since(t0) / static_cast<double>(opt.forward_repeats));

    bridge.apply(mesh, goal);
    body::skin(target, out, body::forward_kinematics(target, out), kFitSkin, verts);
    r.projector_error += mean_vertex_error(verts, goal);

    if (denoiser != nullptr) {
      std::array<float, body::kBodyPoseDim> clean{};
      denoiser->denoise(out.body_pose(), clean);
      t0 = Clock::now();
      for (std::size_t k = 0; k < opt.forward_repeats; ++k) denoiser->denoise(out.body_pose(), clean);
      den_ms.push_back(ms_since(t0) / static_cast<double>(opt.forward_repeats));
    }
  }
  r.fit_ms = median(fit_ms);
  r.forward_ms = median(fwd_ms);
  r.denoise_ms = median(den_ms);
  r.speedup = r.forward_ms > 0.0 ? r.fit_ms / r.forward_ms : 0.0;
  r.fit_error /= static_cast<double>(n);
  r.projector_error /= static_cast<double>(n);
  return r;
}

}  // namespace fsb::projection
