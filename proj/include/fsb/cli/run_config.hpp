#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fsb/decoder/config.hpp"
#include "fsb/pipeline/config.hpp"
#include "fsb/priors/boxes.hpp"
#include "fsb/projection/denoiser.hpp"
#include "fsb/projection/fit.hpp"
#include "fsb/projection/projector.hpp"
#include "fsb/projection/training.hpp"

namespace fsb::cli {

enum class Mode { serial, fast };

// Everything a subcommand needs besides paths. Every section is optional in
// the JSON; absent fields keep their defaults and unknown fields are rejected.
struct RunConfig {
  decoder::ModelConfig model;
  std::uint64_t model_seed = 3;
  std::uint64_t toy_seed = 7;
  std::uint64_t scene_seed = 0;
  priors::ImageSize image;
  // Pipeline fields applied on top of the serial or fast preset.
  std::string pipeline = "{}";
  projection::FitConfig fit;
  projection::TrainConfig train;
  projection::ProjectorShape projector;
  projection::DenoiserConfig denoiser;
  projection::MotionConfig motion;

  // Resolved pipeline settings for a mode.
  pipeline::PipelineConfig pipeline_config(Mode mode) const;

  // ConfigError naming the offending field.
  void validate() const;
  // Complete: every field, defaults included.
  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);  // IoError if unreadable
};

Mode parse_mode(const std::string& s);  // "serial" | "fast", ConfigError otherwise

}  // namespace fsb::cli
