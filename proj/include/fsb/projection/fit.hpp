#pragma once

#include <span>
#include <string>
#include <vector>

#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/bodymodel/pose.hpp"
#include "fsb/bodymodel/template.hpp"
#include "fsb/projection/bridge.hpp"

namespace fsb::projection {

struct FitConfig {
  int steps = 300;
  float lr = 0.05f;
  float lambda_pose = 1e-3f;   // on body_pose
  float lambda_shape = 1e-2f;  // on shape

  void validate() const;  // ConfigError
  std::string to_json() const;
  static FitConfig from_json(const std::string& text);
};

// Vertices are always skinned with correctives.
inline constexpr body::SkinOptions kFitSkin{.correctives = true, .sparse_weights = true};

// sum_v |skin(target, p)_v - goal_v|^2 + lambda_pose |body_pose|^2 + lambda_shape |shape|^2
double fit_objective(const body::BodyTemplate& target, std::span<const float> goal, const body::PoseState& p,
                     const FitConfig& cfg);
// Same, and writes the full 76-slot gradient into grad.
double fit_objective(const body::BodyTemplate& target, std::span<const float> goal, const body::PoseState& p,
                     const FitConfig& cfg, std::span<float, body::kPoseDim> grad);

// Mean Euclidean distance between corresponding rows of two N x 3 buffers.
double mean_vertex_error(std::span<const float> a, std::span<const float> b);

struct FitResult {
  body::PoseState pose;       // best iterate seen
  double vertex_error = 0.0;  // mean per-vertex error of pose against the goal
  int best_step = 0;
  // Best-so-far error after evaluating iterate 0..steps (size steps + 1).
  std::vector<double> best_error;
};

// Adam on fit_objective starting from init. The wrist-child rotation slots
// stay at their initial values. NumericError if the objective goes non-finite.
FitResult fit_to_vertices(std::span<const float> goal, const body::BodyTemplate& target, const FitConfig& cfg,
                          const body::PoseState& init = {});

// Fits the target model to the bridged source mesh.
FitResult iterative_fit(std::span<const float> source_vertices, const Bridge& bridge, const body::BodyTemplate& target,
                        const FitConfig& cfg = {}, const body::PoseState& init = {});

}  // namespace fsb::projection
