#pragma once

#include <span>
#include <string_view>

#include "fsb/numkit/array.hpp"
#include "fsb/numkit/workspace.hpp"

namespace fsb::numkit {

// Throws NumericError naming `what` if any value is NaN or infinite.
void check_finite(std::span<const float> values, std::string_view what);

// out = a * b. Each output element is accumulated left to right over the
// inner index starting from +0, whatever the thread count.
void matmul(ConstMatView a, ConstMatView b, MatView out);
Array matmul(const Array& a, const Array& b);

// out = a * b^T, same summation-order guarantee.
void matmul_bt(ConstMatView a, ConstMatView b, MatView out);

// out = a^T.
void transpose(ConstMatView a, MatView out);

// out[i, :] += bias for every row.
void add_row_bias(MatView out, std::span<const float> bias);

// Row-wise layer normalization with affine parameters (eps = 1e-5).
void layer_norm_rows(MatView x, std::span<const float> gamma, std::span<const float> beta);

// In-place row-wise softmax.
void softmax_rows(MatView x);

void relu_inplace(std::span<float> x);

// Samples image (H x W x C) at grid points (h' x w' x 2, (x, y) in pixel
// units with pixel centers on integers). Coordinates clamp to the edge.
void bilinear_sample(ConstMatView image_hw_c, std::size_t height, std::size_t width,
                     std::span<const float> grid_xy, std::span<float> out);
Array bilinear_sample(const Array& image, const Array& grid);

struct AttnWeights {
  Array wq, wk, wv, wo;          // D x D, stored input-major (x * W)
  Array bq, bk, bv, bo;          // D
  Array ln_gamma, ln_beta;       // D
  std::size_t heads = 1;
  bool residual = true;
  bool layer_norm = true;

  std::size_t dim() const { return wq.dim(0); }
};

struct MlpWeights {
  Array w1, b1;  // D x H, H
  Array w2, b2;  // H x D, D
  Array ln_gamma, ln_beta;
};

// y = LN(x + softmax(Q K^T / sqrt(d)) V Wo + bo), Q from x and K/V from ctx,
// split into `heads` heads. Scratch comes from ws.
void attention_block(ConstMatView x, ConstMatView ctx, const AttnWeights& w, MatView out, Workspace& ws);

// Same, with K and V already projected (ctx_k = ctx Wk + bk, ctx_v likewise).
void attention_block_kv(ConstMatView x, ConstMatView k, ConstMatView v, const AttnWeights& w, MatView out,
                        Workspace& ws);

// K and V projections of ctx for attention_block_kv.
void project_kv(ConstMatView ctx, const AttnWeights& w, MatView k, MatView v);

Array attention_block(const Array& x, const AttnWeights& w);
Array attention_block(const Array& x, const Array& ctx, const AttnWeights& w);

// y = LN(x + relu(x W1 + b1) W2 + b2), in place.
void mlp_block(MatView x, const MlpWeights& w, Workspace& ws);

}  // namespace fsb::numkit
