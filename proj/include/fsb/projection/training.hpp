#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsb/bodymodel/pose_sampler.hpp"
#include "fsb/bodymodel/template.hpp"
#include "fsb/projection/fit.hpp"
#include "fsb/projection/projector.hpp"

namespace fsb::projection {

// Source meshes with the parameters the fitting oracle found for them.
struct ProjectionDataset {
  numkit::Array source;     // N x (3 N_src)
  numkit::Array params;     // N x 76
  numkit::Array fit_error;  // N, mean per-vertex error of params against the bridged mesh

  std::size_t size() const { return source.empty() ? 0 : source.dim(0); }
  ProjectionDataset subset(std::span<const std::size_t> rows) const;
  void validate() const;  // ShapeError
};

// Samples count poses from prior, skins the source model with them and fits
// the target model to each bridged mesh from the rest pose.
ProjectionDataset make_projection_dataset(const body::BodyTemplate& source, const Bridge& bridge,
                                          const body::BodyTemplate& target, std::size_t count, std::uint64_t seed,
                                          const FitConfig& fit = {}, const body::PosePrior& prior = {});

void save_dataset(const std::filesystem::path& dir, const ProjectionDataset& d);
ProjectionDataset load_dataset(const std::filesystem::path& dir);

// Shuffled split. ConfigError unless the dataset has >= 2 rows and both parts are nonempty.
std::pair<ProjectionDataset, ProjectionDataset> split_dataset(const ProjectionDataset& d, std::size_t heldout,
                                                              std::uint64_t seed);

struct TrainConfig {
  float lambda_vertex = 1.0f;  // mean |V_hat - V_goal| over coordinates
  float lambda_reg = 0.1f;     // mean (theta_hat - theta_fit)^2 over the 76 slots
  std::size_t batch = 64;
  float lr = 1e-3f;            // cosine-decayed to 0 over the run
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  // Train on standardized inputs and outputs (training-set statistics),
  // folded back into the first and last layer of the returned weights.
  bool standardize = true;
  // Abort once the minibatch loss has exceeded factor x the first one for patience consecutive steps.
  float divergence_factor = 10.0f;
  std::size_t divergence_patience = 100;

  void validate() const;  // ConfigError
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct EpochStats {
  std::size_t epoch = 0;  // 0 = before the first update
  double train_loss = 0.0;
  double heldout_vertex_err = 0.0;
  double heldout_param_mse = 0.0;
};

struct TrainResult {
  ProjectorWeights weights;  // from the epoch with the lowest held-out vertex error
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;

  // "epoch,train_loss,heldout_vertex_err" plus one row per entry of curve.
  std::string curve_csv() const;
};

// One minibatch: network inputs (B x in), bridged goal meshes (B x 3 N_t)
// and fitted parameters (B x 76).
struct ConversionBatch {
  numkit::ConstMatView inputs;
  numkit::ConstMatView goals;
  numkit::ConstMatView params;
};

// Batch-mean conversion loss. The vertex term skins the target model with
// the network output (wrist-child slots zeroed). When grad is nonempty it
// receives dL/dparameters of net.
double conversion_loss(const Network& net, const ConversionBatch& batch, const body::BodyTemplate& target,
                       const TrainConfig& cfg, std::span<float> grad = {});

// Held-out metrics of a network on prepared inputs.
struct ProjectorEvaluation {
  double vertex_err = 0.0;  // mean per-vertex distance to the bridged mesh
  double param_mse = 0.0;
  double loss = 0.0;
};
ProjectorEvaluation evaluate_projector(const Network& net, const ConversionBatch& all, const body::BodyTemplate& target,
                                       const TrainConfig& cfg);

// NumericError on a non-finite loss or divergence.
TrainResult train_projector(const ProjectionDataset& train, const ProjectionDataset& heldout, const Bridge& bridge,
                            const body::BodyTemplate& target, const TrainConfig& cfg = {},
                            const ProjectorShape& shape = {});

}  // namespace fsb::projection
