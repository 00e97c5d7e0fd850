#pragma once

#include <cstdint>

namespace fsb::numkit::alloc {

// Number of global operator new calls made by the calling thread since it
// started. The library replaces the global allocation functions with thin
// counting wrappers over malloc/free.
std::uint64_t count();

// Scoped delta probe: allocations() returns calls made since construction.
class Probe {
 public:
  Probe() : start_(count()) {}
  std::uint64_t allocations() const { return count() - start_; }

 private:
  std::uint64_t start_;
};

}  // namespace fsb::numkit::alloc
