#include "fsb/numkit/workspace.hpp"

#include <algorithm>

namespace fsb::numkit {
namespace {
constexpr std::size_t kMinChunk = 1 << 16;
// Keep every span 16-float aligned relative to the chunk start.
constexpr std::size_t kAlign = 16;

std::size_t round_up(std::size_t n) { return (n + kAlign - 1) / kAlign * kAlign; }
}  // namespace

Workspace::Workspace(Mode mode) : mode_(mode) {}

std::span<float> Workspace::take(std::size_t n) {
  used_ += round_up(n);
  high_water_ = std::max(high_water_, used_);
  if (mode_ == Mode::dynamic) {
    auto block = std::make_unique<float[]>(n == 0 ? 1 : n);  // value-initialized
    float* p = block.get();
    dynamic_blocks_.push_back(std::move(block));
    return {p, n};
  }
  const std::size_t need = round_up(n);
  if (chunks_.empty() || chunks_.back().size - chunks_.back().offset < need) {
    Chunk c;
    c.size = std::max(need, kMinChunk);
    c.data = std::make_unique<float[]>(c.size);
    chunks_.push_back(std::move(c));
  }
  Chunk& c = chunks_.back();
  float* p = c.data.get() + c.offset;
  c.offset += need;
  std::fill(p, p + n, 0.0f);
  return {p, n};
}

void Workspace::reset() {
  dynamic_blocks_.clear();
  if (mode_ == Mode::arena) {
    if (chunks_.size() > 1) {
      // Grew during this frame: replace with a single block that fits it.
      Chunk c;
      c.size = std::max(high_water_, kMinChunk);
      c.data = std::make_unique<float[]>(c.size);
      chunks_.clear();
      chunks_.push_back(std::move(c));
    }
    for (auto& c : chunks_) c.offset = 0;
  }
  used_ = 0;
}

std::size_t Workspace::capacity() const {
  std::size_t total = 0;
  for (const auto& c : chunks_) total += c.size;
  return total;
}

}  // namespace fsb::numkit
