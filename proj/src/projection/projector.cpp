#include "fsb/projection/projector.hpp"

#include <string>

#include "fsb/bodymodel/pose_sampler.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/fsb_io.hpp"

namespace fsb::projection {
namespace {

std::vector<std::size_t> widths_for(const ProjectorShape& s) {
  if (s.subsample == 0 || s.hidden1 == 0 || s.hidden2 == 0) throw ConfigError("projector: sizes must be positive");
  return {3 * s.subsample, s.hidden1, s.hidden2, body::kPoseDim};
}

}  // namespace

std::vector<std::uint32_t> uniform_subsample(std::size_t n, std::size_t count) {
  if (count == 0 || count > n) throw ConfigError("subsample: need 1 <= count <= " + std::to_string(n));
  std::vector<std::uint32_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = static_cast<std::uint32_t>(i * n / count);
  return idx;
}

ProjectorWeights ProjectorWeights::zeros(std::size_t target_vertices, const ProjectorShape& shape) {
  return {Network(widths_for(shape)), uniform_subsample(target_vertices, shape.subsample)};
}

ProjectorWeights ProjectorWeights::random(std::size_t target_vertices, std::uint64_t seed, const ProjectorShape& shape) {
  return {Network::random(widths_for(shape), seed), uniform_subsample(target_vertices, shape.subsample)};
}

void ProjectorWeights::validate(std::size_t target_vertices) const {
  if (net.num_layers() != 3) throw ShapeError("projector: expected three layers");
  if (net.input_dim() != 3 * subsample.size()) throw ShapeError("projector: input width must be 3 x subsample size");
  if (net.output_dim() != body::kPoseDim) throw ShapeError("projector: output width must be 76");
  for (std::uint32_t i : subsample) {
    if (i >= target_vertices) throw ShapeError("projector: subsample index " + std::to_string(i) + " out of range");
  }
}

void save_projector(const std::filesystem::path& dir, const ProjectorWeights& w) {
  numkit::ArrayBundle b;
  w.net.store(b, "");
  numkit::Array idx({w.subsample.size()});
  for (std::size_t i = 0; i < w.subsample.size(); ++i) idx.mutable_data()[i] = static_cast<float>(w.subsample[i]);
  b.put("subsample", std::move(idx));
  b.meta_json = R"({"kind":"projector"})";
  numkit::save_bundle(dir, b);
}

ProjectorWeights load_projector(const std::filesystem::path& dir) {
  const numkit::ArrayBundle b = numkit::load_bundle(dir);
  ProjectorWeights w;
  w.net = Network::load(b, "");
  for (float f : b.get("subsample").data()) {
    if (!(f >= 0.0f) || f >= 16777216.0f) throw IoError(dir.string() + ": invalid subsample index");
    w.subsample.push_back(static_cast<std::uint32_t>(f));
  }
  return w;
}

Projector::Projector(const Bridge& bridge, ProjectorWeights weights) : bridge_(&bridge), weights_(std::move(weights)) {
  weights_.validate(bridge.target_vertices());
  shifted_.resize(3 * bridge.source_vertices());
  bridged_.resize(3 * bridge.target_vertices());
  x_.resize(weights_.net.input_dim());
  scratch_.resize(weights_.net.scratch_size());
}

void Projector::prepare_input(std::span<const float> source, std::span<float> x) {
  if (source.size() != shifted_.size()) throw ShapeError("projector: source mesh has the wrong vertex count");
  if (x.size() != x_.size()) throw ShapeError("projector: input buffer has the wrong size");
  // Differences against a reference vertex cancel a shared translation
  // exactly whenever the translated coordinates are themselves exact.
  for (std::size_t i = 0; i < source.size(); ++i) shifted_[i] = source[i] - source[i % 3];
  bridge_->apply(shifted_, bridged_);

  const auto& idx = weights_.subsample;
  float centroid[3] = {0.0f, 0.0f, 0.0f};
  for (std::uint32_t v : idx) {
    for (int c = 0; c < 3; ++c) centroid[c] += bridged_[3 * v + c];
  }
  const float inv = 1.0f / static_cast<float>(idx.size());
  for (float& c : centroid) c *= inv;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    for (int c = 0; c < 3; ++c) x[3 * k + c] = bridged_[3 * idx[k] + c] - centroid[c];
  }
}

void Projector::forward(std::span<const float> source, body::PoseState& out) {
  prepare_input(source, x_);
  weights_.net.forward(x_, out.values, scratch_);
  body::zero_hand_slots(out);
}

body::PoseState Projector::forward(std::span<const float> source) {
  body::PoseState p;
  forward(source, p);
  return p;
}

body::PoseState project_forward(std::span<const float> source, const Bridge& bridge, const ProjectorWeights& weights) {
  Projector p(bridge, weights);
  return p.forward(source);
}

}  // namespace fsb::projection
