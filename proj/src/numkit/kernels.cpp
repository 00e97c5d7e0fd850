#include "fsb/numkit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fsb/error.hpp"
#include "fsb/numkit/parallel.hpp"

namespace fsb::numkit {
namespace {

// Rows per parallel chunk is chosen so a chunk carries at least this much work.
constexpr std::size_t kMinChunkFlops = 1 << 18;

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

void copy_cols(ConstMatView src, std::size_t col0, MatView dst) {
  for (std::size_t i = 0; i < dst.rows; ++i) {
    const float* s = src.data + i * src.cols + col0;
    std::copy(s, s + dst.cols, dst.data + i * dst.cols);
  }
}

}  // namespace

void check_finite(std::span<const float> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError("non-finite value in " + std::string(what) + " at index " + std::to_string(i));
    }
  }
}

void matmul(ConstMatView a, ConstMatView b, MatView out) {
  require(a.cols == b.rows, "matmul: inner dimensions differ");
  require(out.rows == a.rows && out.cols == b.cols, "matmul: output shape mismatch");
  const std::size_t n = b.cols;
  const std::size_t k_dim = a.cols;
  const std::size_t work_per_row = std::max<std::size_t>(1, n * k_dim);
  parallel_for(a.rows, std::max<std::size_t>(1, kMinChunkFlops / work_per_row), [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      float* __restrict o = out.data + i * n;
      std::fill(o, o + n, 0.0f);
      const float* arow = a.data + i * k_dim;
      for (std::size_t k = 0; k < k_dim; ++k) {
        const float s = arow[k];
        const float* __restrict brow = b.data + k * n;
        for (std::size_t j = 0; j < n; ++j) o[j] += s * brow[j];
      }
    }
  });
}

Array matmul(const Array& a, const Array& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: operands must be rank 2");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Array out({a.dim(0), b.dim(1)});
  matmul(as_matrix(a), as_matrix(b), as_matrix(out));
  check_finite(out.data(), "matmul");
  return out;
}

void matmul_bt(ConstMatView a, ConstMatView b, MatView out) {
  require(a.cols == b.cols, "matmul_bt: inner dimensions differ");
  require(out.rows == a.rows && out.cols == b.rows, "matmul_bt: output shape mismatch");
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      float acc = 0.0f;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  }
}

void transpose(ConstMatView a, MatView out) {
  require(out.rows == a.cols && out.cols == a.rows, "transpose: output shape mismatch");
  for (std::size_t i = 0; i < a.rows; ++i) {
    const float* r = a.data + i * a.cols;
    for (std::size_t j = 0; j < a.cols; ++j) out.data[j * out.cols + i] = r[j];
  }
}

void add_row_bias(MatView out, std::span<const float> bias) {
  require(bias.size() == out.cols, "add_row_bias: bias length mismatch");
  for (std::size_t i = 0; i < out.rows; ++i) {
    float* o = out.data + i * out.cols;
    for (std::size_t j = 0; j < out.cols; ++j) o[j] += bias[j];
  }
}

void layer_norm_rows(MatView x, std::span<const float> gamma, std::span<const float> beta) {
  require(gamma.size() == x.cols && beta.size() == x.cols, "layer_norm: parameter length mismatch");
  const float inv_n = 1.0f / static_cast<float>(x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    float* r = x.data + i * x.cols;
    float mean = 0.0f;
    for (std::size_t j = 0; j < x.cols; ++j) mean += r[j];
    mean *= inv_n;
    float var = 0.0f;
    for (std::size_t j = 0; j < x.cols; ++j) {
      const float d = r[j] - mean;
      var += d * d;
    }
    var *= inv_n;
    const float inv_std = 1.0f / std::sqrt(var + 1e-5f);
    for (std::size_t j = 0; j < x.cols; ++j) r[j] = (r[j] - mean) * inv_std * gamma[j] + beta[j];
  }
}

void softmax_rows(MatView x) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    float* r = x.data + i * x.cols;
    float mx = r[0];
    for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, r[j]);
    float sum = 0.0f;
    for (std::size_t j = 0; j < x.cols; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    const float inv = 1.0f / sum;
    for (std::size_t j = 0; j < x.cols; ++j) r[j] *= inv;
  }
}

void relu_inplace(std::span<float> x) {
  for (float& v : x) v = v > 0.0f ? v : 0.0f;
}

void bilinear_sample(ConstMatView image, std::size_t height, std::size_t width, std::span<const float> grid,
                     std::span<float> out) {
  const std::size_t channels = image.cols;
  require(image.rows == height * width, "bilinear_sample: image shape mismatch");
  require(grid.size() % 2 == 0 && !grid.empty(), "bilinear_sample: empty grid");
  const std::size_t points = grid.size() / 2;
  require(out.size() == points * channels, "bilinear_sample: output size mismatch");
  const float max_x = static_cast<float>(width - 1);
  const float max_y = static_cast<float>(height - 1);
  for (std::size_t p = 0; p < points; ++p) {
    const float x = std::clamp(grid[2 * p], 0.0f, max_x);
    const float y = std::clamp(grid[2 * p + 1], 0.0f, max_y);
    const auto x0 = static_cast<std::size_t>(std::floor(x));
    const auto y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t x1 = std::min(x0 + 1, width - 1);
    const std::size_t y1 = std::min(y0 + 1, height - 1);
    const float fx = x - static_cast<float>(x0);
    const float fy = y - static_cast<float>(y0);
    const float* i00 = image.data + (y0 * width + x0) * channels;
    const float* i01 = image.data + (y0 * width + x1) * channels;
    const float* i10 = image.data + (y1 * width + x0) * channels;
    const float* i11 = image.data + (y1 * width + x1) * channels;
    float* o = out.data() + p * channels;
    for (std::size_t c = 0; c < channels; ++c) {
      const float top = (1.0f - fx) * i00[c] + fx * i01[c];
      const float bottom = (1.0f - fx) * i10[c] + fx * i11[c];
      o[c] = (1.0f - fy) * top + fy * bottom;
    }
  }
}

Array bilinear_sample(const Array& image, const Array& grid) {
  if (image.rank() != 3) throw ShapeError("bilinear_sample: image must be H x W x C");
  if (grid.rank() != 3 || grid.dim(2) != 2) throw ShapeError("bilinear_sample: grid must be h x w x 2");
  Array out({grid.dim(0), grid.dim(1), image.dim(2)});
  bilinear_sample(as_matrix(image), image.dim(0), image.dim(1), grid.data(), out.mutable_data());
  check_finite(out.data(), "bilinear_sample");
  return out;
}

void project_kv(ConstMatView ctx, const AttnWeights& w, MatView k, MatView v) {
  matmul(ctx, as_matrix(w.wk), k);
  add_row_bias(k, w.bk.data());
  matmul(ctx, as_matrix(w.wv), v);
  add_row_bias(v, w.bv.data());
}

void attention_block_kv(ConstMatView x, ConstMatView k, ConstMatView v, const AttnWeights& w, MatView out,
                        Workspace& ws) {
  const std::size_t d_model = w.dim();
  require(x.cols == d_model && k.cols == d_model && v.cols == d_model, "attention: model dimension mismatch");
  require(k.rows == v.rows && k.rows > 0, "attention: key/value rows mismatch");
  require(w.heads > 0 && d_model % w.heads == 0, "attention: head count must divide model dimension");
  require(out.rows == x.rows && out.cols == d_model, "attention: output shape mismatch");
  const std::size_t m = x.rows;
  const std::size_t n = k.rows;
  const std::size_t hd = d_model / w.heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

  MatView q = as_matrix(ws.take(m * d_model), m, d_model);
  matmul(x, as_matrix(w.wq), q);
  add_row_bias(q, w.bq.data());

  MatView qh = as_matrix(ws.take(m * hd), m, hd);
  MatView kht = as_matrix(ws.take(hd * n), hd, n);
  MatView vh = as_matrix(ws.take(n * hd), n, hd);
  MatView scores = as_matrix(ws.take(m * n), m, n);
  MatView oh = as_matrix(ws.take(m * hd), m, hd);
  MatView heads_out = as_matrix(ws.take(m * d_model), m, d_model);

  for (std::size_t h = 0; h < w.heads; ++h) {
    const std::size_t c0 = h * hd;
    copy_cols(q, c0, qh);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t c = 0; c < hd; ++c) kht(c, j) = k(j, c0 + c);
    }
    copy_cols(v, c0, vh);
    matmul(qh, kht, scores);
    for (float& s : scores.flat()) s *= scale;
    check_finite(scores.flat(), "attention logits");
    softmax_rows(scores);
    matmul(scores, vh, oh);
    for (std::size_t i = 0; i < m; ++i) std::copy(oh.data + i * hd, oh.data + (i + 1) * hd, &heads_out(i, c0));
  }

  matmul(heads_out, as_matrix(w.wo), out);
  add_row_bias(out, w.bo.data());
  if (w.residual) {
    for (std::size_t i = 0; i < m * d_model; ++i) out.data[i] += x.data[i];
  }
  if (w.layer_norm) layer_norm_rows(out, w.ln_gamma.data(), w.ln_beta.data());
}

void attention_block(ConstMatView x, ConstMatView ctx, const AttnWeights& w, MatView out, Workspace& ws) {
  const std::size_t d_model = w.dim();
  require(ctx.cols == d_model, "attention: context dimension mismatch");
  MatView k = as_matrix(ws.take(ctx.rows * d_model), ctx.rows, d_model);
  MatView v = as_matrix(ws.take(ctx.rows * d_model), ctx.rows, d_model);
  project_kv(ctx, w, k, v);
  attention_block_kv(x, k, v, w, out, ws);
}

Array attention_block(const Array& x, const Array& ctx, const AttnWeights& w) {
  if (x.rank() != 2 || ctx.rank() != 2) throw ShapeError("attention: inputs must be rank 2");
  Workspace ws(Workspace::Mode::dynamic);
  Array out({x.dim(0), x.dim(1)});
  attention_block(as_matrix(x), as_matrix(ctx), w, as_matrix(out), ws);
  check_finite(out.data(), "attention_block");
  return out;
}

Array attention_block(const Array& x, const AttnWeights& w) { return attention_block(x, x, w); }

void mlp_block(MatView x, const MlpWeights& w, Workspace& ws) {
  const std::size_t hidden = w.w1.dim(1);
  MatView h = as_matrix(ws.take(x.rows * hidden), x.rows, hidden);
  matmul(x, as_matrix(w.w1), h);
  add_row_bias(h, w.b1.data());
  relu_inplace(h.flat());
  MatView y = as_matrix(ws.take(x.rows * x.cols), x.rows, x.cols);
  matmul(h, as_matrix(w.w2), y);
  add_row_bias(y, w.b2.data());
  for (std::size_t i = 0; i < x.rows * x.cols; ++i) x.data[i] += y.data[i];
  layer_norm_rows(x, w.ln_gamma.data(), w.ln_beta.data());
}

}  // namespace fsb::numkit
