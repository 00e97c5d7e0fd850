#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fsb/numkit/array.hpp"
#include "fsb/numkit/fsb_io.hpp"

namespace fsb::projection {

// Affine layers with relu between them (none after the last). Parameters
// live in one flat buffer, layer by layer: weight (in x out, row-major)
// then bias (out).
class Network {
 public:
  Network() = default;
  // All parameters zero. widths = {in, hidden..., out}.
  explicit Network(std::vector<std::size_t> widths);
  // He-uniform weights, zero biases.
  static Network random(std::vector<std::size_t> widths, std::uint64_t seed);

  std::span<const std::size_t> widths() const { return widths_; }
  std::size_t num_layers() const { return widths_.empty() ? 0 : widths_.size() - 1; }
  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }

  std::span<float> parameters() { return params_; }
  std::span<const float> parameters() const { return params_; }
  numkit::ConstMatView weight(std::size_t layer) const;
  numkit::MatView weight(std::size_t layer);
  std::span<const float> bias(std::size_t layer) const;
  std::span<float> bias(std::size_t layer);

  // One input row. scratch must hold scratch_size() floats. Does not allocate.
  void forward(std::span<const float> x, std::span<float> y, std::span<float> scratch) const;
  std::size_t scratch_size() const;
  // B x in -> B x out.
  numkit::Array forward(const numkit::Array& x) const;

  // Arrays "<prefix>w<l>" and "<prefix>b<l>".
  void store(numkit::ArrayBundle& bundle, const std::string& prefix) const;
  static Network load(const numkit::ArrayBundle& bundle, const std::string& prefix);

 private:
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;  // start of each layer's weight block
  std::vector<float> params_;
};

// Batched forward pass that keeps activations for one backward pass.
class NetworkTape {
 public:
  // x (B x in) must stay alive until backward() returns.
  void forward(const Network& net, numkit::ConstMatView x);
  numkit::ConstMatView output() const;
  // dy: B x out. Overwrites grad (parameters() layout) with dL/dparams.
  void backward(const Network& net, numkit::ConstMatView dy, std::span<float> grad);

 private:
  numkit::ConstMatView input_;
  std::vector<numkit::Array> act_;  // output of every layer, relu applied to hidden ones
  numkit::Array dz_, dz_prev_, trans_;
};

}  // namespace fsb::projection
