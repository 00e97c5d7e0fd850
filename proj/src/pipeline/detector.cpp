#include "fsb/pipeline/detector.hpp"

#include <cmath>
#include <random>

#include "fsb/decoder/encoder.hpp"
#include "fsb/error.hpp"
#include "fsb/priors/scene.hpp"

namespace fsb::pipeline {

DenseDetector::DenseDetector(std::uint64_t seed, DetectorConfig cfg)
    : cfg_(cfg),
      backbone_(decoder::make_encoder(cfg.input_size, cfg.patch, cfg.dim, cfg.heads, cfg.mlp_hidden, cfg.layers,
                                      seed ^ 0xde7ec7)),
      objectness_w_({cfg.dim}) {
  std::mt19937_64 rng(seed ^ 0x0b1ec7);
  std::normal_distribution<float> n(0.0f, 1.0f / std::sqrt(static_cast<float>(cfg.dim)));
  for (float& v : objectness_w_.mutable_data()) v = n(rng);
}

DenseDetection DenseDetector::detect(const numkit::Array& image, priors::ImageSize size) const {
  const auto h = static_cast<std::size_t>(size.height), w = static_cast<std::size_t>(size.width);
  if (image.shape() != numkit::Shape{h, w, 3}) throw ShapeError("detector: image shape does not match its declared size");
  const priors::BBox frame{0.0f, 0.0f, static_cast<float>(w - 1), static_cast<float>(h - 1)};
  const numkit::Array small = numkit::bilinear_sample(image, priors::crop_grid(frame, cfg_.input_size));
  const numkit::Array feats = decoder::encode(backbone_, small);

  const std::size_t tokens = backbone_.tokens(), d = backbone_.dim();
  const auto f = feats.data();
  double logit = objectness_b_;
  for (std::size_t c = 0; c < d; ++c) {
    double pooled = 0.0;
    for (std::size_t t = 0; t < tokens; ++t) pooled += f[t * d + c];
    logit += pooled / static_cast<double>(tokens) * objectness_w_.data()[c];
  }
  DenseDetection out;
  out.score = static_cast<float>(1.0 / (1.0 + std::exp(-logit)));
  out.body_box = priors::foreground_box(image, size);
  return out;
}

}  // namespace fsb::pipeline
