#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fsb/bodymodel/pose.hpp"
#include "fsb/projection/bridge.hpp"
#include "fsb/projection/network.hpp"

namespace fsb::projection {

struct ProjectorShape {
  std::size_t subsample = 300;  // target vertices fed to the network
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 256;
};

struct ProjectorWeights {
  Network net;                           // 3 * |subsample| -> hidden1 -> hidden2 -> 76
  std::vector<std::uint32_t> subsample;  // target vertex indices

  static ProjectorWeights zeros(std::size_t target_vertices, const ProjectorShape& shape = {});
  static ProjectorWeights random(std::size_t target_vertices, std::uint64_t seed, const ProjectorShape& shape = {});
  // ShapeError unless the layer widths and indices fit a target topology of that size.
  void validate(std::size_t target_vertices) const;
};

void save_projector(const std::filesystem::path& dir, const ProjectorWeights& w);
ProjectorWeights load_projector(const std::filesystem::path& dir);

// count indices at a uniform stride over [0, n): floor(i * n / count).
std::vector<std::uint32_t> uniform_subsample(std::size_t n, std::size_t count);

// Feedforward source-mesh-to-parameters conversion. Holds scratch buffers, so
// one instance per thread.
class Projector {
 public:
  // bridge must outlive the projector.
  Projector(const Bridge& bridge, ProjectorWeights weights);

  // Network input for a source mesh (N_src x 3 flat): offsets from source
  // vertex 0, bridged, subsampled, centered on the subsample mean, flattened.
  // Does not allocate.
  void prepare_input(std::span<const float> source, std::span<float> x);
  std::size_t input_dim() const { return weights_.net.input_dim(); }

  // Wrist-child rotation slots of the result are zero. Does not allocate.
  void forward(std::span<const float> source, body::PoseState& out);
  body::PoseState forward(std::span<const float> source);

  const ProjectorWeights& weights() const { return weights_; }
  const Bridge& bridge() const { return *bridge_; }

 private:
  const Bridge* bridge_;
  ProjectorWeights weights_;
  std::vector<float> shifted_, bridged_, x_, scratch_;
};

body::PoseState project_forward(std::span<const float> source, const Bridge& bridge, const ProjectorWeights& weights);

}  // namespace fsb::projection
