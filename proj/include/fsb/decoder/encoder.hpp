#pragma once

#include <span>

#include "fsb/decoder/weights.hpp"
#include "fsb/numkit/array.hpp"
#include "fsb/numkit/workspace.hpp"

namespace fsb::decoder {

// crops: batch x S x S x 3, contiguous. out: batch x (S/p)^2 x D.
// Every crop goes through exactly the same arithmetic whatever the batch
// size or position, so per-crop features are independent of the batch.
void encode(const EncoderWeights& w, std::span<const float> crops, std::size_t batch, std::span<float> out,
            numkit::Workspace& ws);

// crops: B x S x S x 3 (or a single S x S x 3). Returns B x tokens x D.
numkit::Array encode(const EncoderWeights& w, const numkit::Array& crops);

}  // namespace fsb::decoder
