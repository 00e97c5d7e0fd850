#pragma once

#include <cstdint>

#include "fsb/decoder/weights.hpp"
#include "fsb/numkit/array.hpp"
#include "fsb/priors/boxes.hpp"

namespace fsb::pipeline {

struct DetectorConfig {
  std::size_t input_size = 128;
  std::size_t patch = 8;
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t mlp_hidden = 128;
  std::size_t layers = 1;
};

struct DenseDetection {
  priors::BBox body_box;
  float score = 0;  // person objectness in (0, 1)
};

// Stand-in for a dense person detector: a patch transformer over the
// downsampled frame with an objectness head, plus a box head that reads the
// person extent off the frame against the known background.
class DenseDetector {
 public:
  explicit DenseDetector(std::uint64_t seed, DetectorConfig cfg = {});

  // image: H x W x 3.
  DenseDetection detect(const numkit::Array& image, priors::ImageSize size) const;

  const DetectorConfig& config() const { return cfg_; }

 private:
  DetectorConfig cfg_;
  decoder::EncoderWeights backbone_;
  numkit::Array objectness_w_;  // D
  float objectness_b_ = 0;
};

}  // namespace fsb::pipeline
