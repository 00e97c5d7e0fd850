#include "fsb/pipeline/config.hpp"

#include "detail/json_fields.hpp"
#include "fsb/error.hpp"

namespace fsb::pipeline {
namespace {

using nlohmann::json;
using fsb::detail::field;

json box_json(const priors::BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

priors::BBox box_from(const json& j, const char* key, const std::string& where) {
  const auto v = field<std::vector<float>>(j, key, where);
  if (v.size() != 4) throw ConfigError(where + ": field '" + key + "' must hold [x_min, y_min, x_max, y_max]");
  const priors::BBox b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) throw ConfigError(where + ": field '" + key + "' is empty or inverted");
  return b;
}

json selection_json(const decoder::LayerSelection& s) { return s.layers(); }

decoder::LayerSelection selection_from(const json& j, const char* key, const std::string& where, std::size_t layers) {
  const json& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "all") return decoder::LayerSelection::full(layers);
    throw ConfigError(where + ": field '" + key + "' must be \"all\" or a list of layer indices");
  }
  const auto idx = field<std::vector<std::size_t>>(j, key, where);
  decoder::LayerSelection s;
  for (std::size_t l : idx) {
    if (l >= layers) throw ConfigError(where + ": field '" + key + "' names layer " + std::to_string(l) + " of " + std::to_string(layers));
    s.insert(l);
  }
  return s;
}

}  // namespace

const char* batch_mode_name(BatchMode m) {
  switch (m) {
    case BatchMode::full:
      return "full_batch";
    case BatchMode::hands:
      return "hand_batch";
    case BatchMode::none:
      return "no_batch";
  }
  return "?";
}

PipelineConfig PipelineConfig::serial(const decoder::ModelConfig& m) {
  PipelineConfig c;
  c.keypoint_prior = false;
  c.batch = BatchMode::none;
  c.body_layers = decoder::LayerSelection::full(m.body_layers);
  c.hand_layers = decoder::LayerSelection::full(m.hand_layers);
  c.refine = true;
  c.plan = PlanMode::serial_dynamic;
  c.consolidated = false;
  c.crop = CropPrep::two_pass;
  c.parallel_crops = false;
  return c;
}

PipelineConfig PipelineConfig::fast() { return {}; }

void PipelineConfig::validate(const decoder::ModelConfig& m) const {
  if (batch == BatchMode::full && hands && !keypoint_prior) {
    throw ConfigError("pipeline: batched encoding needs hand boxes before the body decode (keypoint_prior)");
  }
  if (plan == PlanMode::fast_static && !keypoint_prior) {
    throw ConfigError("pipeline: the static plan requires the keypoint prior (the dense detector allocates)");
  }
  if (!(hand_alpha > 0.0f)) throw ConfigError("pipeline: hand_alpha must be positive");
  if (!(keypoint_noise >= 0.0f)) throw ConfigError("pipeline: keypoint_noise must be non-negative");
  try {
    body_layers.validate(m.body_layers);
    hand_layers.validate(m.hand_layers);
  } catch (const UsageError& e) {
    throw ConfigError(std::string("pipeline: ") + e.what());
  }
  if (boxes && !(boxes->body.valid() && boxes->left_hand.valid() && boxes->right_hand.valid())) {
    throw ConfigError("pipeline: override boxes must be non-empty");
  }
}

std::string PipelineConfig::to_json() const {
  json j;
  j["keypoint_prior"] = keypoint_prior;
  j["batch"] = batch_mode_name(batch);
  j["body_layers"] = selection_json(body_layers);
  j["hand_layers"] = selection_json(hand_layers);
  j["refine"] = refine;
  j["plan"] = plan == PlanMode::fast_static ? "fast_static" : "serial_dynamic";
  j["consolidated"] = consolidated;
  j["crop"] = crop == CropPrep::native ? "native" : "two_pass";
  j["parallel_crops"] = parallel_crops;
  j["hands"] = hands;
  j["correctives"] = correctives;
  j["hand_alpha"] = hand_alpha;
  j["keypoint_noise"] = keypoint_noise;
  j["noise_seed"] = noise_seed;
  if (boxes) {
    j["boxes"] = {{"body", box_json(boxes->body)}, {"left_hand", box_json(boxes->left_hand)},
                  {"right_hand", box_json(boxes->right_hand)}};
  }
  return j.dump(2);
}

PipelineConfig PipelineConfig::from_json(const std::string& text, const decoder::ModelConfig& m,
                                         const PipelineConfig& base) {
  const json j = fsb::detail::parse_json(text, "pipeline config");
  const std::string where = "pipeline config";
  fsb::detail::reject_unknown(j,
                              {"keypoint_prior", "batch", "body_layers", "hand_layers", "refine", "plan", "consolidated",
                               "crop", "parallel_crops", "hands", "correctives", "hand_alpha", "keypoint_noise", "noise_seed", "boxes",
                               "preset"},
                              where);
  PipelineConfig c = base;
  if (j.contains("preset")) {
    const auto p = field<std::string>(j, "preset", where);
    if (p == "serial") {
      c = serial(m);
    } else if (p == "fast") {
      c = fast();
    } else {
      throw ConfigError(where + ": field 'preset' must be \"serial\" or \"fast\"");
    }
  }
  using fsb::detail::optional_field;
  optional_field(j, "keypoint_prior", where, c.keypoint_prior);
  if (j.contains("batch")) {
    const auto p = field<std::string>(j, "batch", where);
    if (p == "full_batch") {
      c.batch = BatchMode::full;
    } else if (p == "hand_batch") {
      c.batch = BatchMode::hands;
    } else if (p == "no_batch") {
      c.batch = BatchMode::none;
    } else {
      throw ConfigError(where + ": field 'batch' must be \"full_batch\", \"hand_batch\" or \"no_batch\"");
    }
  }
  if (j.contains("body_layers")) c.body_layers = selection_from(j, "body_layers", where, m.body_layers);
  if (j.contains("hand_layers")) c.hand_layers = selection_from(j, "hand_layers", where, m.hand_layers);
  optional_field(j, "refine", where, c.refine);
  if (j.contains("plan")) {
    const auto p = field<std::string>(j, "plan", where);
    if (p == "fast_static") {
      c.plan = PlanMode::fast_static;
    } else if (p == "serial_dynamic") {
      c.plan = PlanMode::serial_dynamic;
    } else {
      throw ConfigError(where + ": field 'plan' must be \"fast_static\" or \"serial_dynamic\"");
    }
  }
  optional_field(j, "consolidated", where, c.consolidated);
  if (j.contains("crop")) {
    const auto p = field<std::string>(j, "crop", where);
    if (p == "native") {
      c.crop = CropPrep::native;
    } else if (p == "two_pass") {
      c.crop = CropPrep::two_pass;
    } else {
      throw ConfigError(where + ": field 'crop' must be \"native\" or \"two_pass\"");
    }
  }
  optional_field(j, "parallel_crops", where, c.parallel_crops);
  optional_field(j, "hands", where, c.hands);
  optional_field(j, "correctives", where, c.correctives);
  optional_field(j, "hand_alpha", where, c.hand_alpha);
  optional_field(j, "keypoint_noise", where, c.keypoint_noise);
  optional_field(j, "noise_seed", where, c.noise_seed);
  if (j.contains("boxes")) {
    const json& b = j.at("boxes");
    const std::string bw = where + ".boxes";
    fsb::detail::reject_unknown(b, {"body", "left_hand", "right_hand"}, bw);
    c.boxes = BoxOverride{box_from(b, "body", bw), box_from(b, "left_hand", bw), box_from(b, "right_hand", bw)};
  }
  c.validate(m);
  return c;
}

}  // namespace fsb::pipeline
