#include "fsb/decoder/decoder.hpp"

#include <algorithm>

#include "fsb/error.hpp"
#include "fsb/numkit/kernels.hpp"

namespace fsb::decoder {

using numkit::ConstMatView;
using numkit::MatView;

namespace detail {

// Positional encodings from one intermediate prediction:
// pos_2d = phi2d(u, v), pos_3d = phi3d(J - J_pelvis) for each tracked joint.
void encode_keypoints(const DecoderWeights& w, const body::FkResult& fk, const DecodeResult& r, MatView pos2d,
                      MatView pos3d, numkit::Workspace& ws) {
  const std::size_t k = w.keypoint_joints.size();
  MatView uv{ws.take(k * 2).data(), k, 2};
  MatView rel{ws.take(k * 3).data(), k, 3};
  const auto& pelvis = fk.joints[body::kPelvis];
  for (std::size_t i = 0; i < k; ++i) {
    const auto& j = fk.joints[w.keypoint_joints[i]];
    for (std::size_t d = 0; d < 3; ++d) rel(i, d) = j[d] - pelvis[d];
    uv(i, 0) = r.camera[0] * rel(i, 0) + r.camera[1];
    uv(i, 1) = r.camera[0] * rel(i, 1) + r.camera[2];
  }
  numkit::matmul(uv, numkit::as_matrix(w.phi2d_w), pos2d);
  numkit::add_row_bias(pos2d, w.phi2d_b.data());
  numkit::matmul(rel, numkit::as_matrix(w.phi3d_w), pos3d);
  numkit::add_row_bias(pos3d, w.phi3d_b.data());
}

// tokens[prompt rows] = init + reshape(kp * W_prompt + b_prompt).
void apply_prompt(const DecoderWeights& w, std::span<const float> kp, MatView tokens, numkit::Workspace& ws) {
  const std::size_t pd = w.prompt_w.dim(1);
  MatView emb{ws.take(pd).data(), 1, pd};
  numkit::matmul(ConstMatView(kp.data(), 1, kp.size()), numkit::as_matrix(w.prompt_w), emb);
  numkit::add_row_bias(emb, w.prompt_b.data());
  float* dst = &tokens(w.layout.prompt_begin(), 0);
  for (std::size_t i = 0; i < pd; ++i) dst[i] += emb.data[i];
}

void add_positions(const DecoderWeights& w, ConstMatView tokens, ConstMatView pos2d, ConstMatView pos3d, MatView h) {
  std::copy(tokens.data, tokens.data + tokens.rows * tokens.cols, h.data);
  const std::size_t d = tokens.cols;
  float* a = &h(w.layout.kp2d_begin(), 0);
  for (std::size_t i = 0; i < pos2d.rows * d; ++i) a[i] += pos2d.data[i];
  float* b = &h(w.layout.kp3d_begin(), 0);
  for (std::size_t i = 0; i < pos3d.rows * d; ++i) b[i] += pos3d.data[i];
}

}  // namespace detail

DecodeResult decode_heads(const DecoderWeights& w, std::span<const float> mhr_token) {
  std::array<float, kHeadDim> r{};
  MatView rv{r.data(), 1, kHeadDim};
  numkit::matmul(ConstMatView(mhr_token.data(), 1, mhr_token.size()), numkit::as_matrix(w.head_w), rv);
  numkit::add_row_bias(rv, w.head_b.data());
  DecodeResult out;
  for (std::size_t i = 0; i < body::kPoseDim; ++i) out.params.values[i] = w.mean_output[i] + r[i];
  for (std::size_t i = 0; i < kCameraDim; ++i) out.camera[i] = w.mean_output[body::kPoseDim + i] + r[body::kPoseDim + i];
  return out;
}

void project_keypoints(const body::BodyTemplate& t, const DecodeResult& r, std::span<const std::size_t> joints,
                       std::span<float> out) {
  if (out.size() != joints.size() * 2) throw ShapeError("project_keypoints: output must hold 2 values per joint");
  const body::FkResult fk = body::forward_kinematics(t, r.params);
  const auto& pelvis = fk.joints[body::kPelvis];
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const auto& j = fk.joints[joints[i]];
    out[2 * i] = r.camera[0] * (j[0] - pelvis[0]) + r.camera[1];
    out[2 * i + 1] = r.camera[0] * (j[1] - pelvis[1]) + r.camera[2];
  }
}

body::PoseState merge(const body::PoseState& b, const body::PoseState* left, const body::PoseState* right) {
  if ((left == nullptr) != (right == nullptr)) throw UsageError("merge: pass both hands or neither");
  body::PoseState out = b;
  if (left != nullptr) {
    std::ranges::copy(left->rotation(body::kLeftHand), out.rotation(body::kLeftHand).begin());
    std::ranges::copy(right->rotation(body::kRightHand), out.rotation(body::kRightHand).begin());
  }
  return out;
}

Decoder::Decoder(const DecoderWeights& w, const body::BodyTemplate& t, std::size_t feature_tokens)
    : w_(w), t_(t), feature_tokens_(feature_tokens) {
  if (t.num_joints() != body::kNumJoints) throw ShapeError("decoder: template must have 22 joints");
  if (w.layers.empty()) throw ShapeError("decoder: no layers");
  const std::size_t m = w.layout.size(), d = w.dim();
  numkit::Workspace ws(numkit::Workspace::Mode::dynamic);
  MatView h{ws.take(m * d).data(), m, d};
  detail::add_positions(w, numkit::as_matrix(w.init_tokens), numkit::as_matrix(w.init_pos_2d),
                        numkit::as_matrix(w.init_pos_3d), h);
  first_self_attn_.resize(m * d);
  numkit::attention_block(h, h, w.layers[0].self_attn, MatView{first_self_attn_.data(), m, d}, ws);
  kv_cache_.resize(w.num_layers() * kMaxBatch * 2 * feature_tokens * d);
}

void Decoder::intermediate_prediction(std::span<const float> mhr_token, const DecodeOptions& opt, MatView pos2d,
                                      MatView pos3d, numkit::Workspace& ws, DecodeCounters& counters) const {
  const DecodeResult r = decode_heads(w_, mhr_token);
  const body::FkResult fk = body::forward_kinematics(t_, r.params);
  ++counters.fk_calls;
  if (!opt.consolidated) {
    // Full body-model evaluation: posed mesh and its image-plane footprint.
    const std::size_t nv = t_.num_vertices();
    std::span<float> mesh = ws.take(nv * 3);
    body::skin(t_, r.params, fk, opt.mesh, mesh);
    std::span<float> mesh2d = ws.take(nv * 2);
    const auto& pelvis = fk.joints[body::kPelvis];
    for (std::size_t v = 0; v < nv; ++v) {
      mesh2d[2 * v] = r.camera[0] * (mesh[3 * v] - pelvis[0]) + r.camera[1];
      mesh2d[2 * v + 1] = r.camera[0] * (mesh[3 * v + 1] - pelvis[1]) + r.camera[2];
    }
    numkit::check_finite(mesh2d, "intermediate mesh");
  }
  detail::encode_keypoints(w_, fk, r, pos2d, pos3d, ws);
  ++counters.projection_calls;
  ++counters.intermediate_predictions;
}

void Decoder::decode(std::span<const ConstMatView> features, std::span<const float> prompts, const DecodeOptions& opt,
                     std::span<DecodeResult> out, numkit::Workspace& ws, DecodeCounters& counters, DecodeTrace* trace) {
  const std::size_t batch = features.size();
  const std::size_t m = w_.layout.size(), d = w_.dim(), k = w_.layout.keypoints, n = feature_tokens_;
  const std::size_t layers = w_.num_layers();
  opt.selection.validate(layers);
  if (out.size() != batch) throw ShapeError("decode: output span must match the batch");
  if (batch > kMaxBatch) throw ShapeError("decode: batch too large");
  if (!prompts.empty() && prompts.size() != batch * 2 * k) throw ShapeError("decode: prompts must be batch x 2K");
  for (const ConstMatView& f : features) {
    if (f.rows != n || f.cols != d) throw ShapeError("decode: feature map must be N x D");
  }
  if (batch == 0) return;
  const bool reuse = opt.consolidated && opt.reuse_features && kv_items_ == batch;

  struct Item {
    MatView tokens, pos2d, pos3d, h, s;
  };
  std::array<Item, kMaxBatch> items;
  for (std::size_t b = 0; b < batch; ++b) {
    Item& it = items[b];
    it.tokens = {ws.take(m * d).data(), m, d};
    it.pos2d = {ws.take(k * d).data(), k, d};
    it.pos3d = {ws.take(k * d).data(), k, d};
    it.h = {ws.take(m * d).data(), m, d};
    it.s = {ws.take(m * d).data(), m, d};
    std::ranges::copy(w_.init_tokens.data(), it.tokens.data);
    std::ranges::copy(w_.init_pos_2d.data(), it.pos2d.data);
    std::ranges::copy(w_.init_pos_3d.data(), it.pos3d.data);
    if (!prompts.empty()) detail::apply_prompt(w_, prompts.subspan(b * 2 * k, 2 * k), it.tokens, ws);
  }

  auto kv = [&](std::size_t layer, std::size_t b, std::size_t which) {
    return MatView{kv_cache_.data() + (((layer * kMaxBatch + b) * 2 + which) * n * d), n, d};
  };
  if (opt.consolidated && !reuse) {
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t b = 0; b < batch; ++b) numkit::project_kv(features[b], w_.layers[l].cross_attn, kv(l, b, 0), kv(l, b, 1));
    }
    kv_items_ = batch;
  }

  if (trace != nullptr) trace->layers.clear();
  int last_updated = -1;
  for (std::size_t l = 0; l < layers; ++l) {
    const DecoderLayer& layer = w_.layers[l];
    for (std::size_t b = 0; b < batch; ++b) {
      Item& it = items[b];
      if (opt.consolidated && l == 0 && prompts.empty()) {
        std::ranges::copy(first_self_attn_, it.s.data);
      } else {
        detail::add_positions(w_, it.tokens, it.pos2d, it.pos3d, it.h);
        numkit::attention_block(it.h, it.h, layer.self_attn, it.s, ws);
      }
      if (opt.consolidated) {
        numkit::attention_block_kv(it.s, kv(l, b, 0), kv(l, b, 1), layer.cross_attn, it.tokens, ws);
      } else {
        numkit::attention_block(it.s, features[b], layer.cross_attn, it.tokens, ws);
      }
      numkit::mlp_block(it.tokens, layer.mlp, ws);
      if (opt.selection.contains(l)) {
        intermediate_prediction(it.tokens.row(0), opt, it.pos2d, it.pos3d, ws, counters);
      }
    }
    if (opt.selection.contains(l)) last_updated = static_cast<int>(l);
    if (trace != nullptr) {
      const Item& it = items[0];
      TokenSequence ts;
      ts.layout = w_.layout;
      ts.tokens = numkit::Array({m, d}, {it.tokens.data, it.tokens.data + m * d});
      ts.pos_2d = numkit::Array({k, d}, {it.pos2d.data, it.pos2d.data + k * d});
      ts.pos_3d = numkit::Array({k, d}, {it.pos3d.data, it.pos3d.data + k * d});
      ts.last_updated_layer = last_updated;
      trace->layers.push_back(std::move(ts));
    }
  }
  for (std::size_t b = 0; b < batch; ++b) {
    numkit::check_finite(items[b].tokens.flat(), "decoder tokens");
    out[b] = decode_heads(w_, items[b].tokens.row(0));
  }
  ++counters.passes;
}

DecodeResult Decoder::decode_one(const numkit::Array& features, const DecodeOptions& opt, DecodeCounters& counters,
                                 std::span<const float> prompts, DecodeTrace* trace) {
  const ConstMatView f = numkit::as_matrix(features);
  DecodeResult r;
  numkit::Workspace ws(numkit::Workspace::Mode::dynamic);
  decode(std::span<const ConstMatView>(&f, 1), prompts, opt, std::span<DecodeResult>(&r, 1), ws, counters, trace);
  return r;
}

DecodeResult decode_reference(const DecoderWeights& w, const body::BodyTemplate& t, const numkit::Array& features,
                              std::span<const float> prompts, std::vector<numkit::Array>* layer_tokens) {
  const std::size_t m = w.layout.size(), d = w.dim(), k = w.layout.keypoints;
  numkit::Workspace ws(numkit::Workspace::Mode::dynamic);
  numkit::Array tokens = w.init_tokens;
  numkit::Array pos2d = w.init_pos_2d;
  numkit::Array pos3d = w.init_pos_3d;
  if (!prompts.empty()) {
    if (prompts.size() != 2 * k) throw ShapeError("decode_reference: prompts must hold 2K values");
    detail::apply_prompt(w, prompts, MatView{tokens.mutable_data().data(), m, d}, ws);
  }
  const numkit::Array f = features.reshaped({features.size() / d, d});
  if (layer_tokens != nullptr) layer_tokens->clear();
  for (const DecoderLayer& layer : w.layers) {
    numkit::Array h({m, d});
    detail::add_positions(w, numkit::as_matrix(tokens), numkit::as_matrix(pos2d), numkit::as_matrix(pos3d),
                          MatView{h.mutable_data().data(), m, d});
    const numkit::Array s = numkit::attention_block(h, layer.self_attn);
    tokens = numkit::attention_block(s, f, layer.cross_attn);
    numkit::mlp_block(MatView{tokens.mutable_data().data(), m, d}, layer.mlp, ws);

    const DecodeResult r = decode_heads(w, tokens.data().subspan(0, d));
    const body::FkResult fk = body::forward_kinematics(t, r.params);
    detail::encode_keypoints(w, fk, r, MatView{pos2d.mutable_data().data(), k, d},
                             MatView{pos3d.mutable_data().data(), k, d}, ws);
    if (layer_tokens != nullptr) layer_tokens->push_back(tokens);
  }
  return decode_heads(w, tokens.data().subspan(0, d));
}

}  // namespace fsb::decoder
