#include "fsb/numkit/grad_tape.hpp"

#include <atomic>
#include <cmath>

#include "fsb/error.hpp"
#include "fsb/numkit/kernels.hpp"

namespace fsb::numkit {
namespace {

std::atomic<std::uint64_t> g_next_tape_id{1};

void accumulate(Array& dst, std::span<const float> src) {
  auto d = dst.mutable_data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += src[i];
}

// a^T * b for row-major views.
void matmul_at(ConstMatView a, ConstMatView b, MatView out) {
  for (float& v : out.flat()) v = 0.0f;
  for (std::size_t r = 0; r < a.rows; ++r) {
    const float* arow = a.data + r * a.cols;
    const float* brow = b.data + r * b.cols;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const float s = arow[i];
      if (s == 0.0f) continue;
      float* o = out.data + i * out.cols;
      for (std::size_t j = 0; j < b.cols; ++j) o[j] += s * brow[j];
    }
  }
}

Array transposed(const Array& m) {
  Array t({m.dim(1), m.dim(0)});
  transpose(as_matrix(m), as_matrix(t));
  return t;
}

void check_same_shape(const Array& a, const Array& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

}  // namespace

GradTape::GradTape() : id_(g_next_tape_id.fetch_add(1)) {}

Var GradTape::push(Node node) {
  node.needs_grad = node.op == Op::leaf_input;
  for (std::uint32_t i : node.inputs) node.needs_grad = node.needs_grad || nodes_[i].needs_grad;
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1), id_};
}

const GradTape::Node& GradTape::node(Var v) const {
  if (v.tape_id != id_ || v.index >= nodes_.size()) throw UsageError("variable handle is not on this tape");
  return nodes_[v.index];
}

const Array& GradTape::value(Var v) const { return node(v).value; }

Var GradTape::input(Array value) { return push({Op::leaf_input, std::move(value), {}, 0.0f, {}}); }
Var GradTape::constant(Array value) { return push({Op::leaf_const, std::move(value), {}, 0.0f, {}}); }

Var GradTape::matmul(Var a, Var b) {
  Array out = numkit::matmul(node(a).value, node(b).value);
  return push({Op::matmul, std::move(out), {a.index, b.index}, 0.0f, {}});
}

Var GradTape::add(Var a, Var b) {
  const Array& x = node(a).value;
  const Array& y = node(b).value;
  check_same_shape(x, y, "add");
  Array out = x;
  accumulate(out, y.data());
  return push({Op::add, std::move(out), {a.index, b.index}, 0.0f, {}});
}

Var GradTape::sub(Var a, Var b) {
  const Array& x = node(a).value;
  const Array& y = node(b).value;
  check_same_shape(x, y, "sub");
  Array out = x;
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= y[i];
  return push({Op::sub, std::move(out), {a.index, b.index}, 0.0f, {}});
}

Var GradTape::mul(Var a, Var b) {
  const Array& x = node(a).value;
  const Array& y = node(b).value;
  check_same_shape(x, y, "mul");
  Array out = x;
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= y[i];
  return push({Op::mul, std::move(out), {a.index, b.index}, 0.0f, {}});
}

Var GradTape::add_row_bias(Var a, Var bias) {
  const Array& x = node(a).value;
  const Array& b = node(bias).value;
  if (x.rank() != 2 || b.size() != x.dim(1)) throw ShapeError("add_row_bias: bias length must equal column count");
  Array out = x;
  numkit::add_row_bias(as_matrix(out), b.data());
  return push({Op::add_row_bias, std::move(out), {a.index, bias.index}, 0.0f, {}});
}

Var GradTape::scale(Var a, float s) {
  Array out = node(a).value;
  for (float& v : out.mutable_data()) v *= s;
  return push({Op::scale, std::move(out), {a.index}, s, {}});
}

Var GradTape::relu(Var a) {
  Array out = node(a).value;
  relu_inplace(out.mutable_data());
  return push({Op::relu, std::move(out), {a.index}, 0.0f, {}});
}

Var GradTape::reshape(Var a, Shape shape) {
  Array out = node(a).value.reshaped(std::move(shape));
  return push({Op::reshape, std::move(out), {a.index}, 0.0f, {}});
}

Var GradTape::sum(Var a) {
  double acc = 0.0;
  for (float v : node(a).value.data()) acc += v;
  return push({Op::sum, Array({1}, {static_cast<float>(acc)}), {a.index}, 0.0f, {}});
}

Var GradTape::sum_squares(Var a) {
  double acc = 0.0;
  for (float v : node(a).value.data()) acc += static_cast<double>(v) * v;
  return push({Op::sum_squares, Array({1}, {static_cast<float>(acc)}), {a.index}, 0.0f, {}});
}

Var GradTape::abs_sum(Var a) {
  double acc = 0.0;
  for (float v : node(a).value.data()) acc += std::fabs(v);
  return push({Op::abs_sum, Array({1}, {static_cast<float>(acc)}), {a.index}, 0.0f, {}});
}

Var GradTape::custom(std::span<const Var> inputs, Array output, BackwardFn backward) {
  std::vector<std::uint32_t> idx;
  idx.reserve(inputs.size());
  for (Var v : inputs) {
    node(v);
    idx.push_back(v.index);
  }
  check_finite(output.data(), "custom op output");
  return push({Op::custom, std::move(output), std::move(idx), 0.0f, std::move(backward)});
}

std::map<Var, Array> GradTape::grad(Var loss) const {
  const Node& loss_node = node(loss);
  if (loss_node.value.size() != 1) throw UsageError("grad: loss must be a scalar");

  std::vector<Array> grads(nodes_.size());
  auto grad_of = [&](std::uint32_t i) -> Array& {
    if (grads[i].empty()) grads[i] = Array::zeros(nodes_[i].value.shape());
    return grads[i];
  };
  // Gradients into constant-only subgraphs are never read.
  auto wants = [&](std::uint32_t i) { return nodes_[i].needs_grad; };
  grad_of(loss.index).mutable_data()[0] = 1.0f;

  for (std::size_t k = loss.index + 1; k-- > 0;) {
    const Node& n = nodes_[k];
    if (grads[k].empty() || !n.needs_grad) continue;
    const Array& g = grads[k];
    switch (n.op) {
      case Op::leaf_input:
      case Op::leaf_const:
        break;
      case Op::matmul: {
        const Array& a = nodes_[n.inputs[0]].value;
        const Array& b = nodes_[n.inputs[1]].value;
        // dA = G B^T, dB = A^T G
        if (wants(n.inputs[0])) {
          Array da({a.dim(0), a.dim(1)});
          numkit::matmul(as_matrix(g), as_matrix(transposed(b)), as_matrix(da));
          accumulate(grad_of(n.inputs[0]), da.data());
        }
        if (wants(n.inputs[1])) {
          Array db({b.dim(0), b.dim(1)});
          matmul_at(as_matrix(a), as_matrix(g), as_matrix(db));
          accumulate(grad_of(n.inputs[1]), db.data());
        }
        break;
      }
      case Op::add:
        accumulate(grad_of(n.inputs[0]), g.data());
        accumulate(grad_of(n.inputs[1]), g.data());
        break;
      case Op::sub: {
        accumulate(grad_of(n.inputs[0]), g.data());
        auto d = grad_of(n.inputs[1]).mutable_data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
        break;
      }
      case Op::mul: {
        const Array& a = nodes_[n.inputs[0]].value;
        const Array& b = nodes_[n.inputs[1]].value;
        auto da = grad_of(n.inputs[0]).mutable_data();
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i] * b[i];
        auto db = grad_of(n.inputs[1]).mutable_data();
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[i] * a[i];
        break;
      }
      case Op::add_row_bias: {
        accumulate(grad_of(n.inputs[0]), g.data());
        auto db = grad_of(n.inputs[1]).mutable_data();
        const std::size_t cols = db.size();
        for (std::size_t i = 0; i < g.size(); ++i) db[i % cols] += g[i];
        break;
      }
      case Op::scale: {
        auto d = grad_of(n.inputs[0]).mutable_data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += n.scalar * g[i];
        break;
      }
      case Op::relu: {
        const Array& in = nodes_[n.inputs[0]].value;
        auto d = grad_of(n.inputs[0]).mutable_data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += in[i] > 0.0f ? g[i] : 0.0f;
        break;
      }
      case Op::reshape:
        accumulate(grad_of(n.inputs[0]), g.data());
        break;
      case Op::sum: {
        auto d = grad_of(n.inputs[0]).mutable_data();
        for (float& v : d) v += g[0];
        break;
      }
      case Op::sum_squares: {
        const Array& in = nodes_[n.inputs[0]].value;
        auto d = grad_of(n.inputs[0]).mutable_data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0f * in[i] * g[0];
        break;
      }
      case Op::abs_sum: {
        const Array& in = nodes_[n.inputs[0]].value;
        auto d = grad_of(n.inputs[0]).mutable_data();
        for (std::size_t i = 0; i < d.size(); ++i) {
          const float s = in[i] > 0.0f ? 1.0f : (in[i] < 0.0f ? -1.0f : 0.0f);
          d[i] += s * g[0];
        }
        break;
      }
      case Op::custom: {
        std::vector<Array> local;
        local.reserve(n.inputs.size());
        for (std::uint32_t i : n.inputs) local.push_back(Array::zeros(nodes_[i].value.shape()));
        n.backward(g, local);
        for (std::size_t i = 0; i < n.inputs.size(); ++i) accumulate(grad_of(n.inputs[i]), local[i].data());
        break;
      }
    }
  }

  std::map<Var, Array> result;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (nodes_[k].op != Op::leaf_input) continue;
    Var v{static_cast<std::uint32_t>(k), id_};
    result.emplace(v, grads[k].empty() ? Array::zeros(nodes_[k].value.shape()) : grads[k]);
  }
  return result;
}

}  // namespace fsb::numkit
