#pragma once

#include <span>
#include <vector>

namespace fsb::numkit {

// Adam over a flat parameter vector.
class Adam {
 public:
  struct Options {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
  };

  Adam(std::size_t n, Options opt);

  void step(std::span<float> params, std::span<const float> grads);
  void set_lr(float lr) { opt_.lr = lr; }
  float lr() const { return opt_.lr; }
  long steps() const { return t_; }

 private:
  Options opt_;
  std::vector<float> m_, v_;
  long t_ = 0;
};

}  // namespace fsb::numkit
