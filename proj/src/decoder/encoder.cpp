#include "fsb/decoder/encoder.hpp"

#include <algorithm>

#include "fsb/error.hpp"
#include "fsb/numkit/kernels.hpp"

namespace fsb::decoder {

using numkit::ConstMatView;
using numkit::MatView;

void encode(const EncoderWeights& w, std::span<const float> crops, std::size_t batch, std::span<float> out,
            numkit::Workspace& ws) {
  const std::size_t s = w.input_size, p = w.patch, g = w.grid(), n = w.tokens(), d = w.dim();
  const std::size_t pv = p * p * 3;
  if (batch == 0) throw ShapeError("encode: empty batch");
  if (crops.size() != batch * s * s * 3) throw ShapeError("encode: crop batch has the wrong size");
  if (out.size() != batch * n * d) throw ShapeError("encode: output buffer has the wrong size");

  // Patchify every crop into one stacked row block; rows never interact in
  // the row-wise kernels, so stacking leaves each crop's values unchanged.
  MatView patches{ws.take(batch * n * pv).data(), batch * n, pv};
  for (std::size_t b = 0; b < batch; ++b) {
    const float* img = crops.data() + b * s * s * 3;
    for (std::size_t gy = 0; gy < g; ++gy) {
      for (std::size_t gx = 0; gx < g; ++gx) {
        float* row = &patches(b * n + gy * g + gx, 0);
        for (std::size_t py = 0; py < p; ++py) {
          const float* src = img + ((gy * p + py) * s + gx * p) * 3;
          std::copy(src, src + p * 3, row + py * p * 3);
        }
      }
    }
  }
  MatView x{out.data(), batch * n, d};
  numkit::matmul(patches, numkit::as_matrix(w.patch_w), x);
  numkit::add_row_bias(x, w.patch_b.data());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n * d; ++i) x.data[b * n * d + i] += w.pos.data()[i];
  }

  MatView attn_out{ws.take(n * d).data(), n, d};
  for (const EncoderBlock& block : w.blocks) {
    for (std::size_t b = 0; b < batch; ++b) {
      MatView xb{x.data + b * n * d, n, d};
      numkit::attention_block(xb, xb, block.attn, attn_out, ws);
      std::copy(attn_out.data, attn_out.data + n * d, xb.data);
    }
    numkit::mlp_block(x, block.mlp, ws);
  }
  numkit::check_finite(out, "encoder features");
}

numkit::Array encode(const EncoderWeights& w, const numkit::Array& crops) {
  const std::size_t s = w.input_size;
  std::size_t batch = 0;
  if (crops.rank() == 3 && crops.shape() == numkit::Shape{s, s, 3}) {
    batch = 1;
  } else if (crops.rank() == 4 && crops.dim(1) == s && crops.dim(2) == s && crops.dim(3) == 3) {
    batch = crops.dim(0);
  } else {
    throw ShapeError("encode: crops must be B x " + std::to_string(s) + " x " + std::to_string(s) + " x 3, got " +
                     numkit::shape_string(crops.shape()));
  }
  numkit::Array out({batch, w.tokens(), w.dim()});
  numkit::Workspace ws(numkit::Workspace::Mode::dynamic);
  encode(w, crops.data(), batch, out.mutable_data(), ws);
  return out;
}

}  // namespace fsb::decoder
