#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "fsb/numkit/array.hpp"

namespace fsb::numkit {

// Handle to a value recorded on a GradTape. Carries the tape's identity so a
// handle from another tape is rejected instead of silently aliasing.
struct Var {
  std::uint32_t index = 0;
  std::uint64_t tape_id = 0;

  auto operator<=>(const Var&) const = default;
};

// Minimal reverse-mode tape. Every op appends one node; grad() walks the
// nodes in exact reverse recording order.
class GradTape {
 public:
  // Backward for a custom op: receives d(loss)/d(output) and must add its
  // contribution into grads (one zero-initialized array per input, same
  // shapes as the inputs).
  using BackwardFn = std::function<void(const Array& grad_out, std::span<Array> grads)>;

  GradTape();

  // Differentiable leaf; grad() reports a gradient for it.
  Var input(Array value);
  // Non-differentiable leaf.
  Var constant(Array value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                 // elementwise
  Var add_row_bias(Var a, Var bias);     // a: m x n, bias: n
  Var scale(Var a, float s);
  Var relu(Var a);
  Var reshape(Var a, Shape shape);
  Var sum(Var a);                        // -> scalar
  Var sum_squares(Var a);                // -> scalar
  Var abs_sum(Var a);                    // -> scalar, L1
  Var custom(std::span<const Var> inputs, Array output, BackwardFn backward);

  const Array& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Gradient of scalar `loss` with respect to every input() leaf. Leaves the
  // loss does not depend on get zeros.
  std::map<Var, Array> grad(Var loss) const;

 private:
  enum class Op { leaf_input, leaf_const, matmul, add, sub, mul, add_row_bias, scale, relu, reshape, sum, sum_squares,
                  abs_sum, custom };

  struct Node {
    Op op;
    Array value;
    std::vector<std::uint32_t> inputs;
    float scalar = 0.0f;
    BackwardFn backward;
    bool needs_grad = false;  // some input() leaf flows into this node
  };

  Var push(Node node);
  const Node& node(Var v) const;

  std::uint64_t id_;
  std::vector<Node> nodes_;
};

}  // namespace fsb::numkit
