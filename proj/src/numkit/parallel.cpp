#include "fsb/numkit/parallel.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace fsb::numkit {
namespace {

// Set while a parallel region is active on this thread; nested regions run inline.
thread_local bool t_in_region = false;

class Pool {
 public:
  explicit Pool(int workers) {
    threads_.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) threads_.emplace_back([this, i] { loop(i + 1); });
  }

  ~Pool() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int size() const { return static_cast<int>(threads_.size()) + 1; }

  void run(std::size_t n, std::size_t chunks, detail::RangeFn fn, void* ctx) {
    {
      std::lock_guard lock(mu_);
      fn_ = fn;
      ctx_ = ctx;
      n_ = n;
      chunks_ = chunks;
      pending_ = static_cast<int>(threads_.size());
      ++generation_;
    }
    cv_.notify_all();
    run_chunk(0);
    std::unique_lock lock(mu_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
  }

 private:
  void run_chunk(std::size_t idx) {
    if (idx >= chunks_) return;
    const std::size_t per = (n_ + chunks_ - 1) / chunks_;
    const std::size_t b = idx * per;
    const std::size_t e = std::min(n_, b + per);
    if (b < e) fn_(ctx_, b, e);
  }

  void loop(int idx) {
    t_in_region = true;
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      run_chunk(static_cast<std::size_t>(idx));
      {
        std::lock_guard lock(mu_);
        --pending_;
      }
      done_cv_.notify_one();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  bool stop_ = false;
  std::uint64_t generation_ = 0;
  int pending_ = 0;
  detail::RangeFn fn_ = nullptr;
  void* ctx_ = nullptr;
  std::size_t n_ = 0;
  std::size_t chunks_ = 0;
};

int g_threads = 1;
std::unique_ptr<Pool> g_pool;

}  // namespace

void set_num_threads(int n) {
  n = std::max(1, n);
  if (n == g_threads) return;
  g_pool.reset();
  g_threads = n;
  if (n > 1) g_pool = std::make_unique<Pool>(n - 1);
}

int num_threads() { return g_threads; }

int apply_thread_env() {
  const char* env = std::getenv("FSB_THREADS");
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (env != nullptr) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  set_num_threads(n);
  return n;
}

namespace detail {

void parallel_for_impl(std::size_t n, std::size_t min_chunk, RangeFn fn, void* ctx) {
  if (n == 0) return;
  const std::size_t max_chunks = min_chunk == 0 ? n : std::max<std::size_t>(1, n / min_chunk);
  const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(g_threads), max_chunks);
  if (chunks <= 1 || !g_pool || t_in_region) {
    fn(ctx, 0, n);
    return;
  }
  t_in_region = true;
  g_pool->run(n, chunks, fn, ctx);
  t_in_region = false;
}

}  // namespace detail
}  // namespace fsb::numkit
