#include "fsb/decoder/weights.hpp"

#include <cmath>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "fsb/bodymodel/pose_sampler.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/fsb_io.hpp"

namespace fsb::decoder {
namespace {

using numkit::Array;

class Init {
 public:
  explicit Init(std::uint64_t seed) : rng_(seed) {}

  Array normal(numkit::Shape shape, float stddev) {
    Array a(std::move(shape));
    std::normal_distribution<float> n(0.0f, stddev);
    for (float& v : a.mutable_data()) v = n(rng_);
    return a;
  }

  numkit::AttnWeights attn(std::size_t d, std::size_t heads) {
    const float s = 1.0f / std::sqrt(static_cast<float>(d));
    numkit::AttnWeights w;
    w.wq = normal({d, d}, s);
    w.wk = normal({d, d}, s);
    w.wv = normal({d, d}, s);
    w.wo = normal({d, d}, s);
    w.bq = normal({d}, 0.02f);
    w.bk = normal({d}, 0.02f);
    w.bv = normal({d}, 0.02f);
    w.bo = normal({d}, 0.02f);
    w.ln_gamma = Array::full({d}, 1.0f);
    w.ln_beta = Array::zeros({d});
    w.heads = heads;
    return w;
  }

  numkit::MlpWeights mlp(std::size_t d, std::size_t hidden) {
    numkit::MlpWeights w;
    w.w1 = normal({d, hidden}, 1.0f / std::sqrt(static_cast<float>(d)));
    w.b1 = normal({hidden}, 0.02f);
    w.w2 = normal({hidden, d}, 1.0f / std::sqrt(static_cast<float>(hidden)));
    w.b2 = normal({d}, 0.02f);
    w.ln_gamma = Array::full({d}, 1.0f);
    w.ln_beta = Array::zeros({d});
    return w;
  }

 private:
  std::mt19937_64 rng_;
};

DecoderWeights make_decoder(const ModelConfig& cfg, std::size_t num_layers, std::vector<std::size_t> joints,
                            std::uint64_t seed, bool zero_prompt) {
  Init init(seed);
  const std::size_t d = cfg.dim;
  DecoderWeights w;
  w.layout = {.prompts = cfg.prompt_tokens, .keypoints = joints.size(), .hand = cfg.hand_tokens};
  w.keypoint_joints = std::move(joints);
  const std::size_t k = w.layout.keypoints;
  w.init_tokens = init.normal({w.layout.size(), d}, 1.0f);
  w.init_pos_2d = init.normal({k, d}, 0.5f);
  w.init_pos_3d = init.normal({k, d}, 0.5f);
  for (std::size_t l = 0; l < num_layers; ++l) {
    DecoderLayer layer;
    layer.self_attn = init.attn(d, cfg.heads);
    layer.cross_attn = init.attn(d, cfg.heads);
    layer.mlp = init.mlp(d, cfg.mlp_hidden);
    w.layers.push_back(std::move(layer));
  }
  w.head_w = init.normal({d, kHeadDim}, cfg.head_scale);
  w.head_b = Array::zeros({kHeadDim});
  w.mean_output = Array::zeros({kHeadDim});
  body::PosePrior prior{.global_sigma = 0.0f, .body_sigma = 0.15f, .shape_sigma = 0.3f, .zero_hands = true};
  const body::PoseState mean = body::sample_pose(seed ^ 0x6d65616eull, prior);
  auto mo = w.mean_output.mutable_data();
  std::copy(mean.values.begin(), mean.values.end(), mo.begin());
  mo[body::kPoseDim] = 1.0f;
  w.phi2d_w = init.normal({2, d}, 0.5f);
  w.phi2d_b = init.normal({d}, 0.02f);
  w.phi3d_w = init.normal({3, d}, 0.5f);
  w.phi3d_b = init.normal({d}, 0.02f);
  w.prompt_w = zero_prompt ? Array::zeros({2 * k, cfg.prompt_tokens * d}) : init.normal({2 * k, cfg.prompt_tokens * d}, 0.1f);
  w.prompt_b = zero_prompt ? Array::zeros({cfg.prompt_tokens * d}) : init.normal({cfg.prompt_tokens * d}, 0.02f);
  return w;
}

// Bundle naming helpers.
void put_attn(numkit::ArrayBundle& b, const std::string& p, const numkit::AttnWeights& w) {
  b.put(p + ".wq", w.wq);
  b.put(p + ".wk", w.wk);
  b.put(p + ".wv", w.wv);
  b.put(p + ".wo", w.wo);
  b.put(p + ".bq", w.bq);
  b.put(p + ".bk", w.bk);
  b.put(p + ".bv", w.bv);
  b.put(p + ".bo", w.bo);
  b.put(p + ".ln_gamma", w.ln_gamma);
  b.put(p + ".ln_beta", w.ln_beta);
}

numkit::AttnWeights get_attn(const numkit::ArrayBundle& b, const std::string& p, std::size_t heads) {
  numkit::AttnWeights w;
  w.wq = b.get(p + ".wq");
  w.wk = b.get(p + ".wk");
  w.wv = b.get(p + ".wv");
  w.wo = b.get(p + ".wo");
  w.bq = b.get(p + ".bq");
  w.bk = b.get(p + ".bk");
  w.bv = b.get(p + ".bv");
  w.bo = b.get(p + ".bo");
  w.ln_gamma = b.get(p + ".ln_gamma");
  w.ln_beta = b.get(p + ".ln_beta");
  w.heads = heads;
  return w;
}

void put_mlp(numkit::ArrayBundle& b, const std::string& p, const numkit::MlpWeights& w) {
  b.put(p + ".w1", w.w1);
  b.put(p + ".b1", w.b1);
  b.put(p + ".w2", w.w2);
  b.put(p + ".b2", w.b2);
  b.put(p + ".ln_gamma", w.ln_gamma);
  b.put(p + ".ln_beta", w.ln_beta);
}

numkit::MlpWeights get_mlp(const numkit::ArrayBundle& b, const std::string& p) {
  numkit::MlpWeights w;
  w.w1 = b.get(p + ".w1");
  w.b1 = b.get(p + ".b1");
  w.w2 = b.get(p + ".w2");
  w.b2 = b.get(p + ".b2");
  w.ln_gamma = b.get(p + ".ln_gamma");
  w.ln_beta = b.get(p + ".ln_beta");
  return w;
}

void put_encoder(numkit::ArrayBundle& b, const std::string& p, const EncoderWeights& w) {
  b.put(p + ".patch_w", w.patch_w);
  b.put(p + ".patch_b", w.patch_b);
  b.put(p + ".pos", w.pos);
  for (std::size_t i = 0; i < w.blocks.size(); ++i) {
    put_attn(b, p + ".block" + std::to_string(i) + ".attn", w.blocks[i].attn);
    put_mlp(b, p + ".block" + std::to_string(i) + ".mlp", w.blocks[i].mlp);
  }
}

EncoderWeights get_encoder(const numkit::ArrayBundle& b, const std::string& p, const ModelConfig& cfg) {
  EncoderWeights w;
  w.input_size = cfg.crop_size;
  w.patch = cfg.patch;
  w.patch_w = b.get(p + ".patch_w");
  w.patch_b = b.get(p + ".patch_b");
  w.pos = b.get(p + ".pos");
  for (std::size_t i = 0; i < cfg.encoder_layers; ++i) {
    w.blocks.push_back({get_attn(b, p + ".block" + std::to_string(i) + ".attn", cfg.heads),
                        get_mlp(b, p + ".block" + std::to_string(i) + ".mlp")});
  }
  return w;
}

void put_decoder(numkit::ArrayBundle& b, const std::string& p, const DecoderWeights& w) {
  b.put(p + ".init_tokens", w.init_tokens);
  b.put(p + ".init_pos_2d", w.init_pos_2d);
  b.put(p + ".init_pos_3d", w.init_pos_3d);
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    const std::string lp = p + ".layer" + std::to_string(i);
    put_attn(b, lp + ".self", w.layers[i].self_attn);
    put_attn(b, lp + ".cross", w.layers[i].cross_attn);
    put_mlp(b, lp + ".mlp", w.layers[i].mlp);
  }
  b.put(p + ".head_w", w.head_w);
  b.put(p + ".head_b", w.head_b);
  b.put(p + ".mean_output", w.mean_output);
  b.put(p + ".phi2d_w", w.phi2d_w);
  b.put(p + ".phi2d_b", w.phi2d_b);
  b.put(p + ".phi3d_w", w.phi3d_w);
  b.put(p + ".phi3d_b", w.phi3d_b);
  b.put(p + ".prompt_w", w.prompt_w);
  b.put(p + ".prompt_b", w.prompt_b);
}

DecoderWeights get_decoder(const numkit::ArrayBundle& b, const std::string& p, const ModelConfig& cfg,
                           std::size_t num_layers, std::vector<std::size_t> joints) {
  DecoderWeights w;
  w.layout = {.prompts = cfg.prompt_tokens, .keypoints = joints.size(), .hand = cfg.hand_tokens};
  w.keypoint_joints = std::move(joints);
  w.init_tokens = b.get(p + ".init_tokens");
  w.init_pos_2d = b.get(p + ".init_pos_2d");
  w.init_pos_3d = b.get(p + ".init_pos_3d");
  for (std::size_t i = 0; i < num_layers; ++i) {
    const std::string lp = p + ".layer" + std::to_string(i);
    w.layers.push_back({get_attn(b, lp + ".self", cfg.heads), get_attn(b, lp + ".cross", cfg.heads), get_mlp(b, lp + ".mlp")});
  }
  w.head_w = b.get(p + ".head_w");
  w.head_b = b.get(p + ".head_b");
  w.mean_output = b.get(p + ".mean_output");
  w.phi2d_w = b.get(p + ".phi2d_w");
  w.phi2d_b = b.get(p + ".phi2d_b");
  w.phi3d_w = b.get(p + ".phi3d_w");
  w.phi3d_b = b.get(p + ".phi3d_b");
  w.prompt_w = b.get(p + ".prompt_w");
  w.prompt_b = b.get(p + ".prompt_b");
  if (w.init_tokens.shape() != numkit::Shape{w.layout.size(), cfg.dim}) {
    throw ConfigError("model bundle: " + p + " token table does not match the config");
  }
  return w;
}

std::vector<std::size_t> all_joints() {
  std::vector<std::size_t> j(body::kNumJoints);
  for (std::size_t i = 0; i < j.size(); ++i) j[i] = i;
  return j;
}

bool attn_equal(const numkit::AttnWeights& a, const numkit::AttnWeights& b) {
  return a.wq.bit_equal(b.wq) && a.wk.bit_equal(b.wk) && a.wv.bit_equal(b.wv) && a.wo.bit_equal(b.wo) &&
         a.bq.bit_equal(b.bq) && a.bk.bit_equal(b.bk) && a.bv.bit_equal(b.bv) && a.bo.bit_equal(b.bo) &&
         a.ln_gamma.bit_equal(b.ln_gamma) && a.ln_beta.bit_equal(b.ln_beta) && a.heads == b.heads;
}

bool mlp_equal(const numkit::MlpWeights& a, const numkit::MlpWeights& b) {
  return a.w1.bit_equal(b.w1) && a.b1.bit_equal(b.b1) && a.w2.bit_equal(b.w2) && a.b2.bit_equal(b.b2) &&
         a.ln_gamma.bit_equal(b.ln_gamma) && a.ln_beta.bit_equal(b.ln_beta);
}

bool encoder_equal(const EncoderWeights& a, const EncoderWeights& b) {
  if (a.blocks.size() != b.blocks.size() || a.input_size != b.input_size || a.patch != b.patch) return false;
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    if (!attn_equal(a.blocks[i].attn, b.blocks[i].attn) || !mlp_equal(a.blocks[i].mlp, b.blocks[i].mlp)) return false;
  }
  return a.patch_w.bit_equal(b.patch_w) && a.patch_b.bit_equal(b.patch_b) && a.pos.bit_equal(b.pos);
}

bool decoder_equal(const DecoderWeights& a, const DecoderWeights& b) {
  if (a.layers.size() != b.layers.size() || a.keypoint_joints != b.keypoint_joints) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (!attn_equal(a.layers[i].self_attn, b.layers[i].self_attn) ||
        !attn_equal(a.layers[i].cross_attn, b.layers[i].cross_attn) || !mlp_equal(a.layers[i].mlp, b.layers[i].mlp)) {
      return false;
    }
  }
  return a.init_tokens.bit_equal(b.init_tokens) && a.init_pos_2d.bit_equal(b.init_pos_2d) &&
         a.init_pos_3d.bit_equal(b.init_pos_3d) && a.head_w.bit_equal(b.head_w) && a.head_b.bit_equal(b.head_b) &&
         a.mean_output.bit_equal(b.mean_output) && a.phi2d_w.bit_equal(b.phi2d_w) &&
         a.phi2d_b.bit_equal(b.phi2d_b) && a.phi3d_w.bit_equal(b.phi3d_w) && a.phi3d_b.bit_equal(b.phi3d_b) &&
         a.prompt_w.bit_equal(b.prompt_w) && a.prompt_b.bit_equal(b.prompt_b);
}

}  // namespace

const std::vector<std::size_t>& hand_keypoint_joints() {
  static const std::vector<std::size_t> j{body::kLeftWrist, body::kRightWrist, body::kLeftHand, body::kRightHand};
  return j;
}

EncoderWeights make_encoder(std::size_t input_size, std::size_t patch, std::size_t dim, std::size_t heads,
                            std::size_t mlp_hidden, std::size_t layers, std::uint64_t seed) {
  if (patch == 0 || input_size % patch != 0) throw ShapeError("encoder: input size must be a multiple of the patch size");
  Init init(seed);
  EncoderWeights w;
  w.input_size = input_size;
  w.patch = patch;
  const std::size_t pv = patch * patch * 3;
  w.patch_w = init.normal({pv, dim}, 1.0f / std::sqrt(static_cast<float>(pv)) * 4.0f);
  w.patch_b = init.normal({dim}, 0.02f);
  w.pos = init.normal({w.tokens(), dim}, 0.5f);
  for (std::size_t i = 0; i < layers; ++i) w.blocks.push_back({init.attn(dim, heads), init.mlp(dim, mlp_hidden)});
  return w;
}

FrozenModel make_model(const ModelConfig& cfg, std::uint64_t seed, bool zero_prompt_weights) {
  cfg.validate();
  FrozenModel m;
  m.config = cfg;
  m.encoder = make_encoder(cfg.crop_size, cfg.patch, cfg.dim, cfg.heads, cfg.mlp_hidden, cfg.encoder_layers,
                           seed * 4 + 1);
  m.body = make_decoder(cfg, cfg.body_layers, all_joints(), seed * 4 + 2, zero_prompt_weights);
  m.hand = make_decoder(cfg, cfg.hand_layers, hand_keypoint_joints(), seed * 4 + 3, zero_prompt_weights);
  return m;
}

void save_model(const std::filesystem::path& dir, const FrozenModel& m) {
  numkit::ArrayBundle b;
  const ModelConfig& c = m.config;
  nlohmann::json meta = {{"crop_size", c.crop_size},         {"patch", c.patch},
                         {"dim", c.dim},                     {"heads", c.heads},
                         {"mlp_hidden", c.mlp_hidden},       {"encoder_layers", c.encoder_layers},
                         {"body_layers", c.body_layers},     {"hand_layers", c.hand_layers},
                         {"prompt_tokens", c.prompt_tokens}, {"hand_tokens", c.hand_tokens},
                         {"head_scale", c.head_scale}};
  b.meta_json = meta.dump();
  put_encoder(b, "encoder", m.encoder);
  put_decoder(b, "body", m.body);
  put_decoder(b, "hand", m.hand);
  numkit::save_bundle(dir, b);
}

FrozenModel load_model(const std::filesystem::path& dir) {
  const numkit::ArrayBundle b = numkit::load_bundle(dir);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(b.meta_json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model manifest: ") + e.what());
  }
  FrozenModel m;
  ModelConfig& c = m.config;
  try {
    c.crop_size = meta.at("crop_size").get<std::size_t>();
    c.patch = meta.at("patch").get<std::size_t>();
    c.dim = meta.at("dim").get<std::size_t>();
    c.heads = meta.at("heads").get<std::size_t>();
    c.mlp_hidden = meta.at("mlp_hidden").get<std::size_t>();
    c.encoder_layers = meta.at("encoder_layers").get<std::size_t>();
    c.body_layers = meta.at("body_layers").get<std::size_t>();
    c.hand_layers = meta.at("hand_layers").get<std::size_t>();
    c.prompt_tokens = meta.at("prompt_tokens").get<std::size_t>();
    c.hand_tokens = meta.at("hand_tokens").get<std::size_t>();
    c.head_scale = meta.at("head_scale").get<float>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model manifest: ") + e.what());
  }
  c.validate();
  m.encoder = get_encoder(b, "encoder", c);
  m.body = get_decoder(b, "body", c, c.body_layers, all_joints());
  m.hand = get_decoder(b, "hand", c, c.hand_layers, hand_keypoint_joints());
  return m;
}

bool bit_equal(const FrozenModel& a, const FrozenModel& b) {
  return encoder_equal(a.encoder, b.encoder) && decoder_equal(a.body, b.body) && decoder_equal(a.hand, b.hand);
}

}  // namespace fsb::decoder
