#include "fsb/projection/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fsb/error.hpp"
#include "fsb/numkit/kernels.hpp"

namespace fsb::projection {

Network::Network(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw UsageError("network: need at least an input and an output width");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    if (widths_[l] == 0 || widths_[l + 1] == 0) throw UsageError("network: widths must be positive");
    offsets_.push_back(total);
    total += widths_[l] * widths_[l + 1] + widths_[l + 1];
  }
  params_.assign(total, 0.0f);
}

Network Network::random(std::vector<std::size_t> widths, std::uint64_t seed) {
  Network n(std::move(widths));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < n.num_layers(); ++l) {
    const float a = std::sqrt(6.0f / static_cast<float>(n.widths_[l]));
    std::uniform_real_distribution<float> dist(-a, a);
    for (float& w : n.weight(l).flat()) w = dist(rng);
  }
  return n;
}

numkit::ConstMatView Network::weight(std::size_t l) const {
  return {params_.data() + offsets_.at(l), widths_[l], widths_[l + 1]};
}
numkit::MatView Network::weight(std::size_t l) {
  return {params_.data() + offsets_.at(l), widths_[l], widths_[l + 1]};
}
std::span<const float> Network::bias(std::size_t l) const {
  return {params_.data() + offsets_.at(l) + widths_[l] * widths_[l + 1], widths_[l + 1]};
}
std::span<float> Network::bias(std::size_t l) {
  return {params_.data() + offsets_.at(l) + widths_[l] * widths_[l + 1], widths_[l + 1]};
}

std::size_t Network::scratch_size() const {
  std::size_t widest = 0;
  for (std::size_t l = 1; l + 1 < widths_.size(); ++l) widest = std::max(widest, widths_[l]);
  return 2 * widest;
}

void Network::forward(std::span<const float> x, std::span<float> y, std::span<float> scratch) const {
  if (x.size() != input_dim() || y.size() != output_dim()) throw ShapeError("network: input or output size mismatch");
  if (scratch.size() < scratch_size()) throw ShapeError("network: scratch too small");
  const float* in = x.data();
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const bool last = l + 1 == num_layers();
    float* out = last ? y.data() : scratch.data() + (l % 2) * (scratch.size() / 2);
    numkit::MatView o{out, 1, widths_[l + 1]};
    numkit::matmul({in, 1, widths_[l]}, weight(l), o);
    numkit::add_row_bias(o, bias(l));
    if (!last) numkit::relu_inplace(o.flat());
    in = out;
  }
}

numkit::Array Network::forward(const numkit::Array& x) const {
  if (x.rank() != 2 || x.dim(1) != input_dim()) throw ShapeError("network: input must be B x " + std::to_string(input_dim()));
  NetworkTape tape;
  tape.forward(*this, numkit::as_matrix(x));
  const numkit::ConstMatView y = tape.output();
  return numkit::Array({y.rows, y.cols}, std::vector<float>(y.data, y.data + y.rows * y.cols));
}

void Network::store(numkit::ArrayBundle& bundle, const std::string& prefix) const {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const numkit::ConstMatView w = weight(l);
    bundle.put(prefix + "w" + std::to_string(l),
               numkit::Array({w.rows, w.cols}, std::vector<float>(w.data, w.data + w.rows * w.cols)));
    const auto b = bias(l);
    bundle.put(prefix + "b" + std::to_string(l), numkit::Array({b.size()}, std::vector<float>(b.begin(), b.end())));
  }
}

Network Network::load(const numkit::ArrayBundle& bundle, const std::string& prefix) {
  std::vector<std::size_t> widths;
  for (std::size_t l = 0;; ++l) {
    const std::string key = prefix + "w" + std::to_string(l);
    if (!bundle.arrays.contains(key)) break;
    const numkit::Array& w = bundle.arrays.at(key);
    if (w.rank() != 2) throw IoError("network: " + key + " must be rank 2");
    if (widths.empty()) widths.push_back(w.dim(0));
    if (w.dim(0) != widths.back()) throw IoError("network: " + key + " does not chain with the previous layer");
    widths.push_back(w.dim(1));
  }
  if (widths.size() < 2) throw IoError("network: no layers under prefix '" + prefix + "'");
  Network n(widths);
  for (std::size_t l = 0; l < n.num_layers(); ++l) {
    const numkit::Array& w = bundle.get(prefix + "w" + std::to_string(l));
    const numkit::Array& b = bundle.get(prefix + "b" + std::to_string(l));
    if (b.size() != widths[l + 1]) throw IoError("network: bias " + std::to_string(l) + " has the wrong length");
    std::copy(w.data().begin(), w.data().end(), n.weight(l).data);
    std::copy(b.data().begin(), b.data().end(), n.bias(l).begin());
  }
  return n;
}

void NetworkTape::forward(const Network& net, numkit::ConstMatView x) {
  if (x.cols != net.input_dim()) throw ShapeError("network: input width mismatch");
  input_ = x;
  act_.resize(net.num_layers());
  numkit::ConstMatView in = x;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t w = net.widths()[l + 1];
    if (act_[l].rank() != 2 || act_[l].dim(0) != x.rows || act_[l].dim(1) != w) act_[l] = numkit::Array({x.rows, w});
    numkit::MatView o = numkit::as_matrix(act_[l]);
    numkit::matmul(in, net.weight(l), o);
    numkit::add_row_bias(o, net.bias(l));
    if (l + 1 < net.num_layers()) numkit::relu_inplace(o.flat());
    in = o;
  }
}

numkit::ConstMatView NetworkTape::output() const { return numkit::as_matrix(act_.back()); }

void NetworkTape::backward(const Network& net, numkit::ConstMatView dy, std::span<float> grad) {
  const std::size_t rows = input_.rows;
  if (dy.rows != rows || dy.cols != net.output_dim()) throw ShapeError("network: output gradient shape mismatch");
  if (grad.size() != net.parameters().size()) throw ShapeError("network: gradient buffer size mismatch");
  dz_ = numkit::Array({rows, dy.cols}, std::vector<float>(dy.data, dy.data + rows * dy.cols));

  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const std::size_t in_w = net.widths()[l], out_w = net.widths()[l + 1];
    const numkit::ConstMatView a = l == 0 ? input_ : numkit::as_matrix(act_[l - 1]);
    const numkit::ConstMatView dz = numkit::as_matrix(dz_);
    const std::size_t w_off = static_cast<std::size_t>(net.weight(l).data - net.parameters().data());

    // dW = A^T dZ, as a row-major product over the transposed activations.
    trans_ = numkit::Array({in_w, rows});
    numkit::transpose(a, numkit::as_matrix(trans_));
    numkit::matmul(numkit::as_matrix(trans_), dz, numkit::MatView{grad.data() + w_off, in_w, out_w});
    float* db = grad.data() + w_off + in_w * out_w;
    std::fill(db, db + out_w, 0.0f);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < out_w; ++j) db[j] += dz(r, j);
    }
    if (l == 0) break;

    // dA = dZ W^T, masked by the relu of the previous layer.
    trans_ = numkit::Array({out_w, in_w});
    numkit::transpose(net.weight(l), numkit::as_matrix(trans_));
    dz_prev_ = numkit::Array({rows, in_w});
    numkit::matmul(dz, numkit::as_matrix(trans_), numkit::as_matrix(dz_prev_));
    auto d = dz_prev_.mutable_data();
    const auto act = act_[l - 1].data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!(act[i] > 0.0f)) d[i] = 0.0f;
    }
    std::swap(dz_, dz_prev_);
  }
}

}  // namespace fsb::projection
