#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace fsb::numkit {

// Scratch-buffer provider for kernels that write into caller memory.
//
// dynamic: every take() is a fresh heap allocation, released at reset().
//          Models an eager framework that materializes each intermediate.
// arena:   bump allocation out of a retained buffer. The first frames grow
//          the arena; reset() folds the chunks into one block sized to the
//          high-water mark, after which a frame with the same shapes makes
//          no heap allocation at all.
class Workspace {
 public:
  enum class Mode { dynamic, arena };

  explicit Workspace(Mode mode = Mode::arena);
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
  Workspace(Workspace&&) noexcept = default;
  Workspace& operator=(Workspace&&) noexcept = default;

  Mode mode() const { return mode_; }

  // Zero-filled span of n floats, valid until the next reset().
  std::span<float> take(std::size_t n);

  void reset();

  std::size_t used() const { return used_; }
  std::size_t high_water() const { return high_water_; }
  std::size_t capacity() const;

 private:
  struct Chunk {
    std::unique_ptr<float[]> data;
    std::size_t size = 0;
    std::size_t offset = 0;
  };

  Mode mode_;
  std::vector<Chunk> chunks_;
  std::vector<std::unique_ptr<float[]>> dynamic_blocks_;
  std::size_t used_ = 0;
  std::size_t high_water_ = 0;
};

}  // namespace fsb::numkit
