#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fsb/bodymodel/pose.hpp"
#include "fsb/numkit/array.hpp"
#include "fsb/projection/network.hpp"

namespace fsb::projection {

// Stand-in for motion capture: a random walk in a low-dimensional latent
// space, mapped linearly onto the body pose. The map depends only on
// basis_seed, so datasets drawn with different walk seeds share one manifold.
struct MotionConfig {
  std::size_t latent = 8;
  float persistence = 0.98f;  // per-frame AR(1) coefficient of each latent
  std::size_t sequence = 20;  // frames per walk; each walk starts from the stationary distribution
  float pose_sigma = 0.25f;   // stationary std of each body-pose coordinate (rad)
  std::uint64_t basis_seed = 0;
};

// count x 63 clean body poses; wrist-child slots are zero.
numkit::Array sample_motion(std::size_t count, std::uint64_t seed, const MotionConfig& cfg = {});

struct DenoiserConfig {
  std::size_t hidden = 32;
  float noise_sigma = 0.1f;  // rad, isotropic on every body-pose coordinate
  std::size_t batch = 64;
  float lr = 1e-3f;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError
  std::string to_json() const;
  static DenoiserConfig from_json(const std::string& text);
};

// Two affine layers with a relu between them, body_pose -> body_pose. Keeps
// scratch for denoise(), so one instance per thread.
class Denoiser {
 public:
  Denoiser() = default;
  explicit Denoiser(Network net);

  // Does not allocate.
  void denoise(std::span<const float, body::kBodyPoseDim> in, std::span<float, body::kBodyPoseDim> out) const;
  // Replaces body_pose; orientation and shape pass through.
  body::PoseState denoise(const body::PoseState& p) const;

  const Network& network() const { return net_; }

 private:
  Network net_;
  mutable std::vector<float> scratch_;
};

struct DenoiserTrainResult {
  Denoiser denoiser;
  std::vector<double> epoch_loss;  // mean squared error per coordinate, per epoch
};

// Each step draws fresh Gaussian noise on a minibatch of clean poses and
// regresses the clean pose. NumericError on a non-finite or diverging loss.
DenoiserTrainResult train_denoiser(const numkit::Array& clean, const DenoiserConfig& cfg = {});

void save_denoiser(const std::filesystem::path& dir, const Denoiser& d);
Denoiser load_denoiser(const std::filesystem::path& dir);

}  // namespace fsb::projection
