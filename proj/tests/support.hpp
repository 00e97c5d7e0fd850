#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fsb/numkit/array.hpp"

namespace fsb::testing {

inline numkit::Array random_array(numkit::Shape shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  numkit::Array a(std::move(shape));
  for (float& v : a.mutable_data()) v = dist(rng);
  return a;
}

// Relative error with an absolute floor so near-zero gradients compare on
// an absolute scale.
inline double rel_err(double got, double want, double floor = 1e-4) {
  const double denom = std::max({std::fabs(got), std::fabs(want), floor});
  return std::fabs(got - want) / denom;
}

template <typename F>
std::vector<double> central_diff(std::vector<double> x, F&& f, double h = 1e-3) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Central differences that also flag coordinates where the forward and
// backward one-sided slopes disagree, i.e. a kink (relu, abs) lies inside
// the step. Gradients are only compared where smooth[i] is true.
struct FdResult {
  std::vector<double> grad;
  std::vector<bool> smooth;
};

template <typename F>
FdResult central_diff_checked(std::vector<double> x, F&& f, double h = 1e-3) {
  FdResult r{std::vector<double>(x.size()), std::vector<bool>(x.size(), true)};
  const double f0 = f(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    r.grad[i] = (fp - fm) / (2.0 * h);
    const double fwd = (fp - f0) / h, bwd = (f0 - fm) / h;
    r.smooth[i] = rel_err(fwd, bwd, 1e-2) <= 0.05;
  }
  return r;
}

inline std::vector<double> to_double(const numkit::Array& a) { return {a.data().begin(), a.data().end()}; }

}  // namespace fsb::testing

#include "fsb/bodymodel/pose.hpp"

namespace fsb::testing {

// Random pose with joint rotations ~ N(0, sigma) per axis and shape ~ N(0, shape_sigma).
inline body::PoseState random_pose(std::uint64_t seed, float sigma = 0.4f, float shape_sigma = 1.0f) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> rot(0.0f, sigma), shp(0.0f, shape_sigma);
  body::PoseState p;
  for (std::size_t i = 0; i < body::kShapeOffset; ++i) p.values[i] = rot(rng);
  for (std::size_t i = body::kShapeOffset; i < body::kPoseDim; ++i) p.values[i] = shp(rng);
  return p;
}

}  // namespace fsb::testing
