#pragma once

#include <chrono>
#include <string>

namespace fsb::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

Outcome restructuring_equivalence();  // 1
Outcome encoder_accounting();         // 2
Outcome gating_semantics();           // 3
Outcome static_plan();                // 4
Outcome pipeline_speedup();           // 5
Outcome fit_round_trip();             // 6
Outcome projector_parity();           // 7
Outcome conversion_speedup();         // 8
Outcome gradient_suite();             // 9
Outcome geometry_invariants();        // 10
Outcome prior_robustness();           // 11

}  // namespace fsb::acceptance
