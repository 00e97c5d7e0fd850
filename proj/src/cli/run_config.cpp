#include "fsb/cli/run_config.hpp"

#include <fstream>
#include <sstream>

#include "detail/json_fields.hpp"
#include "fsb/error.hpp"

namespace fsb::cli {
namespace {

using nlohmann::json;
using fsb::detail::optional_field;

json model_json(const decoder::ModelConfig& m) {
  return {{"crop_size", m.crop_size},         {"patch", m.patch},
          {"dim", m.dim},                     {"heads", m.heads},
          {"mlp_hidden", m.mlp_hidden},       {"encoder_layers", m.encoder_layers},
          {"body_layers", m.body_layers},     {"hand_layers", m.hand_layers},
          {"prompt_tokens", m.prompt_tokens}, {"hand_tokens", m.hand_tokens},
          {"head_scale", m.head_scale}};
}

decoder::ModelConfig model_from(const json& j) {
  const std::string where = "config.model";
  fsb::detail::reject_unknown(j,
                              {"crop_size", "patch", "dim", "heads", "mlp_hidden", "encoder_layers", "body_layers",
                               "hand_layers", "prompt_tokens", "hand_tokens", "head_scale"},
                              where);
  decoder::ModelConfig m;
  optional_field(j, "crop_size", where, m.crop_size);
  optional_field(j, "patch", where, m.patch);
  optional_field(j, "dim", where, m.dim);
  optional_field(j, "heads", where, m.heads);
  optional_field(j, "mlp_hidden", where, m.mlp_hidden);
  optional_field(j, "encoder_layers", where, m.encoder_layers);
  optional_field(j, "body_layers", where, m.body_layers);
  optional_field(j, "hand_layers", where, m.hand_layers);
  optional_field(j, "prompt_tokens", where, m.prompt_tokens);
  optional_field(j, "hand_tokens", where, m.hand_tokens);
  optional_field(j, "head_scale", where, m.head_scale);
  return m;
}

json projector_json(const projection::ProjectorShape& s) {
  return {{"subsample", s.subsample}, {"hidden1", s.hidden1}, {"hidden2", s.hidden2}};
}

projection::ProjectorShape projector_from(const json& j) {
  const std::string where = "config.projector";
  fsb::detail::reject_unknown(j, {"subsample", "hidden1", "hidden2"}, where);
  projection::ProjectorShape s;
  optional_field(j, "subsample", where, s.subsample);
  optional_field(j, "hidden1", where, s.hidden1);
  optional_field(j, "hidden2", where, s.hidden2);
  if (s.subsample == 0 || s.hidden1 == 0 || s.hidden2 == 0) throw ConfigError(where + ": sizes must be positive");
  return s;
}

json motion_json(const projection::MotionConfig& m) {
  return {{"latent", m.latent},
          {"persistence", m.persistence},
          {"sequence", m.sequence},
          {"pose_sigma", m.pose_sigma},
          {"basis_seed", m.basis_seed}};
}

projection::MotionConfig motion_from(const json& j) {
  const std::string where = "config.motion";
  fsb::detail::reject_unknown(j, {"latent", "persistence", "sequence", "pose_sigma", "basis_seed"}, where);
  projection::MotionConfig m;
  optional_field(j, "latent", where, m.latent);
  optional_field(j, "persistence", where, m.persistence);
  optional_field(j, "sequence", where, m.sequence);
  optional_field(j, "pose_sigma", where, m.pose_sigma);
  optional_field(j, "basis_seed", where, m.basis_seed);
  if (m.latent == 0 || m.sequence == 0) throw ConfigError(where + ": latent and sequence must be positive");
  if (!(m.persistence >= 0.0f && m.persistence < 1.0f)) throw ConfigError(where + ": persistence must be in [0, 1)");
  return m;
}

// Section configs parse themselves from text; prefix their errors with the section.
template <typename F>
auto section(const json& j, const char* key, F&& parse) {
  try {
    return parse(j.at(key).dump());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config.") + key + ": " + e.what());
  }
}

}  // namespace

Mode parse_mode(const std::string& s) {
  if (s == "serial") return Mode::serial;
  if (s == "fast") return Mode::fast;
  throw ConfigError("mode must be \"serial\" or \"fast\", got \"" + s + "\"");
}

pipeline::PipelineConfig RunConfig::pipeline_config(Mode mode) const {
  const pipeline::PipelineConfig base =
      mode == Mode::serial ? pipeline::PipelineConfig::serial(model) : pipeline::PipelineConfig::fast();
  try {
    return pipeline::PipelineConfig::from_json(pipeline, model, base);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config.pipeline: ") + e.what());
  }
}

void RunConfig::validate() const {
  try {
    model.validate();
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("config.model: ") + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config.model: ") + e.what());
  }
  if (image.width < 16 || image.height < 16) throw ConfigError("config.image: width and height must be >= 16");
  pipeline_config(Mode::serial);
  pipeline_config(Mode::fast);
  fit.validate();
  train.validate();
  denoiser.validate();
}

std::string RunConfig::to_json() const {
  json j;
  j["model"] = model_json(model);
  j["model_seed"] = model_seed;
  j["toy_seed"] = toy_seed;
  j["scene_seed"] = scene_seed;
  j["image"] = {image.width, image.height};
  j["pipeline"] = json::parse(pipeline);
  j["fit"] = json::parse(fit.to_json());
  j["train"] = json::parse(train.to_json());
  j["projector"] = projector_json(projector);
  j["denoiser"] = json::parse(denoiser.to_json());
  j["motion"] = motion_json(motion);
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  const std::string where = "config";
  const json j = fsb::detail::parse_json(text, where);
  fsb::detail::reject_unknown(j,
                              {"model", "model_seed", "toy_seed", "scene_seed", "image", "pipeline", "fit", "train",
                               "projector", "denoiser", "motion"},
                              where);
  RunConfig c;
  if (j.contains("model")) c.model = model_from(j.at("model"));
  optional_field(j, "model_seed", where, c.model_seed);
  optional_field(j, "toy_seed", where, c.toy_seed);
  optional_field(j, "scene_seed", where, c.scene_seed);
  if (j.contains("image")) {
    const auto wh = fsb::detail::field<std::vector<int>>(j, "image", where);
    if (wh.size() != 2) throw ConfigError("config: field 'image' must be [width, height]");
    c.image = {wh[0], wh[1]};
  }
  if (j.contains("pipeline")) {
    if (!j.at("pipeline").is_object()) throw ConfigError("config: field 'pipeline' must be an object");
    c.pipeline = j.at("pipeline").dump();
  }
  if (j.contains("fit")) c.fit = section(j, "fit", projection::FitConfig::from_json);
  if (j.contains("train")) c.train = section(j, "train", projection::TrainConfig::from_json);
  if (j.contains("projector")) c.projector = projector_from(j.at("projector"));
  if (j.contains("denoiser")) c.denoiser = section(j, "denoiser", projection::DenoiserConfig::from_json);
  if (j.contains("motion")) c.motion = motion_from(j.at("motion"));
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError(path.string() + ": cannot open config");
  std::ostringstream s;
  s << f.rdbuf();
  try {
    return from_json(s.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace fsb::cli
