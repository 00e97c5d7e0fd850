#include "fsb/projection/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "detail/json_fields.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/adam.hpp"
#include "fsb/numkit/fsb_io.hpp"

namespace fsb::projection {
namespace {

constexpr std::size_t kDim = body::kBodyPoseDim;

bool is_hand_coordinate(std::size_t i) {
  const std::size_t l = body::rotation_offset(body::kLeftHand) - 3;
  const std::size_t r = body::rotation_offset(body::kRightHand) - 3;
  return (i >= l && i < l + 3) || (i >= r && i < r + 3);
}

}  // namespace

numkit::Array sample_motion(std::size_t count, std::uint64_t seed, const MotionConfig& cfg) {
  if (cfg.latent == 0) throw ConfigError("motion: latent dimension must be positive");
  if (!(cfg.persistence >= 0.0f && cfg.persistence < 1.0f)) throw ConfigError("motion: persistence must be in [0, 1)");
  if (cfg.sequence == 0) throw ConfigError("motion: sequence length must be positive");
  const std::size_t k = cfg.latent;
  std::vector<float> basis(kDim * k);
  {
    std::mt19937_64 rng(cfg.basis_seed);
    std::normal_distribution<float> g(0.0f, cfg.pose_sigma / std::sqrt(static_cast<float>(k)));
    for (std::size_t i = 0; i < kDim; ++i) {
      for (std::size_t j = 0; j < k; ++j) basis[i * k + j] = is_hand_coordinate(i) ? 0.0f : g(rng);
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> unit(0.0f, 1.0f);
  std::vector<float> z(k);
  const float drive = std::sqrt(1.0f - cfg.persistence * cfg.persistence);
  numkit::Array out({count, kDim});
  auto o = out.mutable_data();
  for (std::size_t t = 0; t < count; ++t) {
    if (t % cfg.sequence == 0) {
      for (float& v : z) v = unit(rng);
    } else {
      for (float& v : z) v = cfg.persistence * v + drive * unit(rng);
    }
    for (std::size_t i = 0; i < kDim; ++i) {
      float acc = 0.0f;
      for (std::size_t j = 0; j < k; ++j) acc += basis[i * k + j] * z[j];
      o[t * kDim + i] = acc;
    }
  }
  return out;
}

void DenoiserConfig::validate() const {
  if (hidden == 0 || batch == 0 || epochs == 0) throw ConfigError("denoiser: hidden, batch and epochs must be positive");
  if (!(noise_sigma >= 0.0f) || !std::isfinite(noise_sigma)) throw ConfigError("denoiser: noise sigma must be >= 0");
  if (!(lr > 0.0f) || !std::isfinite(lr)) throw ConfigError("denoiser: learning rate must be positive");
}

std::string DenoiserConfig::to_json() const {
  nlohmann::json j{{"hidden", hidden}, {"noise_sigma", noise_sigma}, {"batch", batch},
                   {"lr", lr},         {"epochs", epochs},           {"seed", seed}};
  return j.dump();
}

DenoiserConfig DenoiserConfig::from_json(const std::string& text) {
  const std::string where = "denoiser config";
  const auto j = detail::parse_json(text, where);
  detail::reject_unknown(j, {"hidden", "noise_sigma", "batch", "lr", "epochs", "seed"}, where);
  DenoiserConfig c;
  detail::optional_field(j, "hidden", where, c.hidden);
  detail::optional_field(j, "noise_sigma", where, c.noise_sigma);
  detail::optional_field(j, "batch", where, c.batch);
  detail::optional_field(j, "lr", where, c.lr);
  detail::optional_field(j, "epochs", where, c.epochs);
  detail::optional_field(j, "seed", where, c.seed);
  c.validate();
  return c;
}

Denoiser::Denoiser(Network net) : net_(std::move(net)) {
  if (net_.num_layers() != 2 || net_.input_dim() != kDim || net_.output_dim() != kDim) {
    throw ShapeError("denoiser: expected a two-layer 63 -> 63 network");
  }
  scratch_.resize(net_.scratch_size());
}

void Denoiser::denoise(std::span<const float, kDim> in, std::span<float, kDim> out) const {
  if (net_.num_layers() == 0) throw UsageError("denoiser: no weights");
  net_.forward(in, out, scratch_);
}

body::PoseState Denoiser::denoise(const body::PoseState& p) const {
  body::PoseState out = p;
  denoise(p.body_pose(), out.body_pose());
  return out;
}

DenoiserTrainResult train_denoiser(const numkit::Array& clean, const DenoiserConfig& cfg) {
  cfg.validate();
  if (clean.rank() != 2 || clean.dim(1) != kDim || clean.dim(0) == 0) {
    throw ShapeError("denoiser: clean poses must be N x 63 with N >= 1");
  }
  const std::size_t n = clean.dim(0);
  Network net = Network::random({kDim, cfg.hidden, kDim}, cfg.seed);
  numkit::Adam adam(net.parameters().size(), {.lr = cfg.lr});
  std::vector<float> grad(net.parameters().size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0xd3a015eULL);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  const std::size_t batches = (n + cfg.batch - 1) / cfg.batch;
  const double total_steps = static_cast<double>(batches * cfg.epochs);
  NetworkTape tape;
  numkit::Array xb, yb, dy;
  DenoiserTrainResult result;
  double first_loss = 0.0;
  std::size_t over = 0, step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch, rows = std::min(n, lo + cfg.batch) - lo;
      if (xb.empty() || xb.dim(0) != rows) {
        xb = numkit::Array({rows, kDim});
        yb = numkit::Array({rows, kDim});
        dy = numkit::Array({rows, kDim});
      }
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t c = 0; c < kDim; ++c) {
          const float v = clean.at(order[lo + i], c);
          yb.at_mut(i, c) = v;
          xb.at_mut(i, c) = cfg.noise_sigma > 0.0f ? v + cfg.noise_sigma * noise(rng) : v;
        }
      }
      tape.forward(net, numkit::as_matrix(xb));
      const numkit::ConstMatView out = tape.output();
      double loss = 0.0;
      const float g_scale = 2.0f / static_cast<float>(rows * kDim);
      for (std::size_t i = 0; i < rows * kDim; ++i) {
        const float r = out.data[i] - yb.data()[i];
        loss += static_cast<double>(r) * r;
        dy.mutable_data()[i] = g_scale * r;
      }
      loss /= static_cast<double>(rows * kDim);
      if (!std::isfinite(loss)) throw NumericError("denoiser: loss became non-finite at step " + std::to_string(step));
      if (step == 0) first_loss = loss;
      over = loss > 10.0 * first_loss ? over + 1 : 0;
      if (over >= 100) {
        std::ostringstream msg;
        msg << "denoiser: diverged, loss " << loss << " above 10x the initial " << first_loss << " for 100 steps";
        throw NumericError(msg.str());
      }
      tape.backward(net, numkit::as_matrix(dy), grad);
      adam.set_lr(static_cast<float>(cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps))));
      adam.step(net.parameters(), grad);
      epoch_loss += loss * static_cast<double>(rows);
      ++step;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
  }
  result.denoiser = Denoiser(std::move(net));
  return result;
}

void save_denoiser(const std::filesystem::path& dir, const Denoiser& d) {
  numkit::ArrayBundle b;
  d.network().store(b, "");
  b.meta_json = R"({"kind":"denoiser"})";
  numkit::save_bundle(dir, b);
}

Denoiser load_denoiser(const std::filesystem::path& dir) {
  const numkit::ArrayBundle b = numkit::load_bundle(dir);
  try {
    return Denoiser(Network::load(b, ""));
  } catch (const ShapeError& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
}

}  // namespace fsb::projection
