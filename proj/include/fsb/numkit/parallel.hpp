#pragma once

#include <cstddef>
#include <type_traits>

namespace fsb::numkit {

// Worker-thread cap for kernels. 1 (the default) runs everything inline.
// Changing it spins up or tears down the persistent pool, so do it outside
// timed regions.
void set_num_threads(int n);
int num_threads();

// Reads FSB_THREADS (if set and positive) and applies it, capped at the
// hardware concurrency. Returns the resulting thread count.
int apply_thread_env();

namespace detail {
using RangeFn = void (*)(void* ctx, std::size_t begin, std::size_t end);
void parallel_for_impl(std::size_t n, std::size_t min_chunk, RangeFn fn, void* ctx);
}  // namespace detail

// Splits [0, n) into contiguous chunks, one per worker. The split only
// decides who computes which index, never how a single index is computed,
// so results are identical at any thread count. Does not allocate.
template <typename F>
void parallel_for(std::size_t n, std::size_t min_chunk, F&& body) {
  using Fn = std::remove_reference_t<F>;
  detail::parallel_for_impl(
      n, min_chunk,
      [](void* ctx, std::size_t b, std::size_t e) { (*static_cast<Fn*>(ctx))(b, e); },
      const_cast<void*>(static_cast<const void*>(&body)));
}

}  // namespace fsb::numkit
