#include "fsb/projection/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "detail/json_fields.hpp"
#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/adam.hpp"

namespace fsb::projection {
namespace {

struct Evaluation {
  double loss = 0.0;
  double error = 0.0;
};

// Skins p into verts, then fills loss, mean error and (optionally) grad.
Evaluation evaluate(const body::BodyTemplate& target, std::span<const float> goal, const body::PoseState& p,
                    const FitConfig& cfg, std::vector<float>& verts, std::vector<float>& resid,
                    float* grad) {
  const std::size_t nv = target.num_vertices();
  if (goal.size() != 3 * nv) throw ShapeError("fit: goal must hold N_v x 3 values of the target topology");
  verts.resize(3 * nv);
  resid.resize(3 * nv);
  const body::FkResult fk = body::forward_kinematics(target, p);
  body::skin(target, p, fk, kFitSkin, verts);

  Evaluation e;
  double data = 0.0;
  for (std::size_t v = 0; v < nv; ++v) {
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      const float r = verts[3 * v + c] - goal[3 * v + c];
      resid[3 * v + c] = 2.0f * r;
      d2 += static_cast<double>(r) * r;
    }
    data += d2;
    e.error += std::sqrt(d2);
  }
  e.error /= static_cast<double>(nv);
  double reg_pose = 0.0, reg_shape = 0.0;
  for (float x : p.body_pose()) reg_pose += static_cast<double>(x) * x;
  for (float x : p.shape()) reg_shape += static_cast<double>(x) * x;
  e.loss = data + cfg.lambda_pose * reg_pose + cfg.lambda_shape * reg_shape;

  if (grad != nullptr) {
    std::span<float, body::kPoseDim> g(grad, body::kPoseDim);
    std::fill(g.begin(), g.end(), 0.0f);
    body::skin_backward(target, p, fk, kFitSkin, resid, g);
    for (std::size_t i = 0; i < body::kBodyPoseDim; ++i) g[3 + i] += 2.0f * cfg.lambda_pose * p.body_pose()[i];
    for (std::size_t i = 0; i < body::kShapeDim; ++i) g[body::kShapeOffset + i] += 2.0f * cfg.lambda_shape * p.shape()[i];
  }
  return e;
}

}  // namespace

void FitConfig::validate() const {
  if (steps < 1) throw ConfigError("fit: steps must be at least 1");
  if (!(lr > 0.0f) || !std::isfinite(lr)) throw ConfigError("fit: learning rate must be positive");
  if (!(lambda_pose >= 0.0f) || !(lambda_shape >= 0.0f)) throw ConfigError("fit: regularizer weights must be >= 0");
}

std::string FitConfig::to_json() const {
  nlohmann::json j{{"steps", steps}, {"lr", lr}, {"lambda_pose", lambda_pose}, {"lambda_shape", lambda_shape}};
  return j.dump();
}

FitConfig FitConfig::from_json(const std::string& text) {
  const std::string where = "fit config";
  const auto j = detail::parse_json(text, where);
  detail::reject_unknown(j, {"steps", "lr", "lambda_pose", "lambda_shape"}, where);
  FitConfig c;
  detail::optional_field(j, "steps", where, c.steps);
  detail::optional_field(j, "lr", where, c.lr);
  detail::optional_field(j, "lambda_pose", where, c.lambda_pose);
  detail::optional_field(j, "lambda_shape", where, c.lambda_shape);
  c.validate();
  return c;
}

double fit_objective(const body::BodyTemplate& target, std::span<const float> goal, const body::PoseState& p,
                     const FitConfig& cfg) {
  std::vector<float> verts, resid;
  return evaluate(target, goal, p, cfg, verts, resid, nullptr).loss;
}

double fit_objective(const body::BodyTemplate& target, std::span<const float> goal, const body::PoseState& p,
                     const FitConfig& cfg, std::span<float, body::kPoseDim> grad) {
  std::vector<float> verts, resid;
  return evaluate(target, goal, p, cfg, verts, resid, grad.data()).loss;
}

double mean_vertex_error(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size() || a.size() % 3 != 0 || a.empty()) {
    throw ShapeError("mean_vertex_error: buffers must be equal-sized N x 3");
  }
  const std::size_t n = a.size() / 3;
  double sum = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(a[3 * v + c]) - b[3 * v + c];
      d2 += d * d;
    }
    sum += std::sqrt(d2);
  }
  return sum / static_cast<double>(n);
}

FitResult fit_to_vertices(std::span<const float> goal, const body::BodyTemplate& target, const FitConfig& cfg,
                          const body::PoseState& init) {
  cfg.validate();
  FitResult r;
  r.best_error.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  body::PoseState p = init;
  std::array<float, body::kPoseDim> grad{};
  std::vector<float> verts, resid;
  numkit::Adam adam(body::kPoseDim, {.lr = cfg.lr});
  const std::size_t hand_l = body::rotation_offset(body::kLeftHand);
  const std::size_t hand_r = body::rotation_offset(body::kRightHand);

  double best = std::numeric_limits<double>::infinity();
  for (int step = 0; step <= cfg.steps; ++step) {
    const Evaluation e = evaluate(target, goal, p, cfg, verts, resid, step < cfg.steps ? grad.data() : nullptr);
    if (!std::isfinite(e.loss)) {
      std::ostringstream msg;
      msg << "fit: objective became non-finite at step " << step << " (loss " << e.loss << ", best error " << best
          << " at step " << r.best_step << ")";
      throw NumericError(msg.str());
    }
    if (e.error < best) {
      best = e.error;
      r.pose = p;
      r.best_step = step;
    }
    r.best_error.push_back(best);
    if (step == cfg.steps) break;
    for (int k = 0; k < 3; ++k) grad[hand_l + k] = grad[hand_r + k] = 0.0f;
    adam.step(p.values, grad);
  }
  r.vertex_error = best;
  return r;
}

FitResult iterative_fit(std::span<const float> source_vertices, const Bridge& bridge, const body::BodyTemplate& target,
                        const FitConfig& cfg, const body::PoseState& init) {
  if (bridge.target_vertices() != target.num_vertices()) {
    throw ShapeError("iterative_fit: bridge output does not match the target topology");
  }
  std::vector<float> goal(3 * bridge.target_vertices());
  bridge.apply(source_vertices, goal);
  return fit_to_vertices(goal, target, cfg, init);
}

}  // namespace fsb::projection
