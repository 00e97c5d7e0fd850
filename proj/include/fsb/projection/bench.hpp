#pragma once

#include <string>

#include "fsb/bodymodel/template.hpp"
#include "fsb/projection/denoiser.hpp"
#include "fsb/projection/fit.hpp"
#include "fsb/projection/projector.hpp"
#include "fsb/projection/training.hpp"

namespace fsb::projection {

struct ConversionBenchOptions {
  std::size_t meshes = 20;            // first rows of the test set
  std::size_t forward_repeats = 200;  // projector (and denoiser) calls timed per mesh
};

struct ConversionReport {
  std::size_t meshes = 0;
  int fit_steps = 0;
  double fit_ms = 0.0;       // median wall time of one iterative_fit
  double forward_ms = 0.0;   // median wall time of one project_forward
  double denoise_ms = 0.0;   // median wall time of one denoise call, 0 without a denoiser
  double speedup = 0.0;      // fit_ms / forward_ms
  double fit_error = 0.0;    // mean per-vertex error against the bridged mesh
  double projector_error = 0.0;

  std::string to_json() const;
};

// Times both conversion paths on the same meshes. Fitting starts from the rest pose.
ConversionReport bench_conversion(const ProjectionDataset& test, const Bridge& bridge, const body::BodyTemplate& target,
                                  const FitConfig& fit, const ProjectorWeights& projector,
                                  const Denoiser* denoiser = nullptr, const ConversionBenchOptions& opt = {});

}  // namespace fsb::projection
