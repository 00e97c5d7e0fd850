#include "fsb/projection/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "detail/json_fields.hpp"
#include "fsb/bodymodel/kinematics.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/adam.hpp"
#include "fsb/numkit/fsb_io.hpp"

namespace fsb::projection {
namespace {

struct SampleTerms {
  double l1 = 0.0;    // mean |r| over coordinates
  double sq = 0.0;    // mean squared parameter error
  double dist = 0.0;  // mean per-vertex distance
};

// Scratch reused across samples.
struct SkinScratch {
  std::vector<float> verts, grad_verts;
};

// Loss terms of one network output row. With grad_row set, adds
// scale * dL/d(row) to it.
SampleTerms sample_terms(const body::BodyTemplate& target, std::span<const float> row, std::span<const float> goal,
                         std::span<const float> fitted, const TrainConfig& cfg, float scale, float* grad_row,
                         SkinScratch& s) {
  const std::size_t nv = target.num_vertices();
  body::PoseState pose;
  std::copy(row.begin(), row.end(), pose.values.begin());
  body::zero_hand_slots(pose);
  const body::FkResult fk = body::forward_kinematics(target, pose);
  s.verts.resize(3 * nv);
  body::skin(target, pose, fk, kFitSkin, s.verts);

  SampleTerms t;
  const float coord_scale = cfg.lambda_vertex * scale / static_cast<float>(3 * nv);
  if (grad_row != nullptr) s.grad_verts.resize(3 * nv);
  for (std::size_t v = 0; v < nv; ++v) {
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      const float r = s.verts[3 * v + c] - goal[3 * v + c];
      t.l1 += std::fabs(r);
      d2 += static_cast<double>(r) * r;
      if (grad_row != nullptr) s.grad_verts[3 * v + c] = r > 0.0f ? coord_scale : (r < 0.0f ? -coord_scale : 0.0f);
    }
    t.dist += std::sqrt(d2);
  }
  t.l1 /= static_cast<double>(3 * nv);
  t.dist /= static_cast<double>(nv);
  for (std::size_t k = 0; k < body::kPoseDim; ++k) {
    const double d = static_cast<double>(pose.values[k]) - fitted[k];
    t.sq += d * d;
  }
  t.sq /= static_cast<double>(body::kPoseDim);

  if (grad_row != nullptr) {
    std::array<float, body::kPoseDim> g{};
    if (cfg.lambda_vertex != 0.0f) body::skin_backward(target, pose, fk, kFitSkin, s.grad_verts, g);
    const float reg_scale = 2.0f * cfg.lambda_reg * scale / static_cast<float>(body::kPoseDim);
    for (std::size_t k = 0; k < body::kPoseDim; ++k) g[k] += reg_scale * (pose.values[k] - fitted[k]);
    body::PoseState mask;
    mask.values = g;
    body::zero_hand_slots(mask);
    for (std::size_t k = 0; k < body::kPoseDim; ++k) grad_row[k] += mask.values[k];
  }
  return t;
}

void check_batch(const Network& net, const ConversionBatch& b, const body::BodyTemplate& target) {
  if (b.inputs.cols != net.input_dim() || net.output_dim() != body::kPoseDim) {
    throw ShapeError("conversion loss: network does not match the inputs");
  }
  if (b.goals.rows != b.inputs.rows || b.goals.cols != 3 * target.num_vertices()) {
    throw ShapeError("conversion loss: goal meshes must be B x 3 N_t");
  }
  if (b.params.rows != b.inputs.rows || b.params.cols != body::kPoseDim) {
    throw ShapeError("conversion loss: fitted parameters must be B x 76");
  }
  if (b.inputs.rows == 0) throw ShapeError("conversion loss: empty batch");
}

void copy_row(numkit::ConstMatView src, std::size_t r, numkit::MatView dst, std::size_t d) {
  std::copy(src.data + r * src.cols, src.data + (r + 1) * src.cols, dst.data + d * dst.cols);
}

}  // namespace

ProjectionDataset ProjectionDataset::subset(std::span<const std::size_t> rows) const {
  validate();
  ProjectionDataset out;
  out.source = numkit::Array({rows.size(), source.dim(1)});
  out.params = numkit::Array({rows.size(), body::kPoseDim});
  out.fit_error = numkit::Array({rows.size()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw ShapeError("dataset: row index out of range");
    copy_row(numkit::as_matrix(source), rows[i], numkit::as_matrix(out.source), i);
    copy_row(numkit::as_matrix(params), rows[i], numkit::as_matrix(out.params), i);
    out.fit_error.mutable_data()[i] = fit_error[rows[i]];
  }
  return out;
}

void ProjectionDataset::validate() const {
  if (source.rank() != 2 || params.rank() != 2 || fit_error.rank() != 1) throw ShapeError("dataset: wrong array ranks");
  if (params.dim(0) != size() || params.dim(1) != body::kPoseDim || fit_error.dim(0) != size()) {
    throw ShapeError("dataset: arrays disagree on the sample count");
  }
  if (source.dim(1) % 3 != 0) throw ShapeError("dataset: source meshes must be N_src x 3");
}

ProjectionDataset make_projection_dataset(const body::BodyTemplate& source, const Bridge& bridge,
                                          const body::BodyTemplate& target, std::size_t count, std::uint64_t seed,
                                          const FitConfig& fit, const body::PosePrior& prior) {
  fit.validate();
  if (bridge.source_vertices() != source.num_vertices()) throw ShapeError("dataset: bridge does not match the source model");
  const std::size_t ns = 3 * source.num_vertices();
  ProjectionDataset d;
  d.source = numkit::Array({count, ns});
  d.params = numkit::Array({count, body::kPoseDim});
  d.fit_error = numkit::Array({count});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const body::PoseState truth = body::sample_pose(rng(), prior);
    std::span<float> mesh = d.source.mutable_data().subspan(i * ns, ns);
    body::skin(source, truth, body::forward_kinematics(source, truth), kFitSkin, mesh);
    const FitResult r = iterative_fit(mesh, bridge, target, fit);
    std::copy(r.pose.values.begin(), r.pose.values.end(), d.params.mutable_data().begin() + i * body::kPoseDim);
    d.fit_error.mutable_data()[i] = static_cast<float>(r.vertex_error);
  }
  return d;
}

void save_dataset(const std::filesystem::path& dir, const ProjectionDataset& d) {
  d.validate();
  numkit::ArrayBundle b;
  b.put("source", d.source);
  b.put("params", d.params);
  b.put("fit_error", d.fit_error);
  b.meta_json = R"({"kind":"projection_dataset"})";
  numkit::save_bundle(dir, b);
}

ProjectionDataset load_dataset(const std::filesystem::path& dir) {
  const numkit::ArrayBundle b = numkit::load_bundle(dir);
  ProjectionDataset d{b.get("source"), b.get("params"), b.get("fit_error")};
  try {
    d.validate();
  } catch (const ShapeError& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
  return d;
}

std::pair<ProjectionDataset, ProjectionDataset> split_dataset(const ProjectionDataset& d, std::size_t heldout,
                                                              std::uint64_t seed) {
  if (d.size() < 2) throw ConfigError("split: dataset needs at least 2 samples");
  if (heldout == 0 || heldout >= d.size()) throw ConfigError("split: both parts must be nonempty");
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::span<const std::size_t> all(order);
  return {d.subset(all.subspan(heldout)), d.subset(all.first(heldout))};
}

void TrainConfig::validate() const {
  if (batch == 0) throw ConfigError("train: batch must be positive");
  if (epochs == 0) throw ConfigError("train: epochs must be positive");
  if (!(lr > 0.0f) || !std::isfinite(lr)) throw ConfigError("train: learning rate must be positive");
  if (!(lambda_vertex >= 0.0f) || !(lambda_reg >= 0.0f)) throw ConfigError("train: loss weights must be >= 0");
  if (lambda_vertex == 0.0f && lambda_reg == 0.0f) throw ConfigError("train: at least one loss weight must be positive");
  if (!(divergence_factor > 1.0f) || divergence_patience == 0) throw ConfigError("train: invalid divergence rule");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j{{"lambda_vertex", lambda_vertex},
                   {"lambda_reg", lambda_reg},
                   {"batch", batch},
                   {"lr", lr},
                   {"epochs", epochs},
                   {"seed", seed},
                   {"standardize", standardize},
                   {"divergence_factor", divergence_factor},
                   {"divergence_patience", divergence_patience}};
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  const std::string where = "train config";
  const auto j = detail::parse_json(text, where);
  detail::reject_unknown(j,
                         {"lambda_vertex", "lambda_reg", "batch", "lr", "epochs", "seed", "standardize",
                          "divergence_factor", "divergence_patience"},
                         where);
  TrainConfig c;
  detail::optional_field(j, "lambda_vertex", where, c.lambda_vertex);
  detail::optional_field(j, "lambda_reg", where, c.lambda_reg);
  detail::optional_field(j, "batch", where, c.batch);
  detail::optional_field(j, "lr", where, c.lr);
  detail::optional_field(j, "epochs", where, c.epochs);
  detail::optional_field(j, "seed", where, c.seed);
  detail::optional_field(j, "standardize", where, c.standardize);
  detail::optional_field(j, "divergence_factor", where, c.divergence_factor);
  detail::optional_field(j, "divergence_patience", where, c.divergence_patience);
  c.validate();
  return c;
}

std::string TrainResult::curve_csv() const {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,train_loss,heldout_vertex_err\n";
  for (const EpochStats& e : curve) out << e.epoch << ',' << e.train_loss << ',' << e.heldout_vertex_err << '\n';
  return out.str();
}

namespace {

// Per-coordinate affine maps around the network: inputs are standardized
// before the first layer and outputs rescaled after the last. Empty vectors
// mean identity.
struct Affine {
  std::vector<float> in_mean, in_inv_std;
  std::vector<float> out_mean, out_std;
};

double batch_loss(const Network& net, const ConversionBatch& batch, const body::BodyTemplate& target,
                  const TrainConfig& cfg, const Affine& io, std::span<float> grad) {
  check_batch(net, batch, target);
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != net.parameters().size()) throw ShapeError("conversion loss: gradient size mismatch");
  const std::size_t rows = batch.inputs.rows;
  NetworkTape tape;
  tape.forward(net, batch.inputs);
  const numkit::ConstMatView y = tape.output();
  numkit::Array dy({rows, body::kPoseDim});
  SkinScratch s;
  double loss = 0.0;
  const float scale = 1.0f / static_cast<float>(rows);
  std::array<float, body::kPoseDim> theta{};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < body::kPoseDim; ++k) {
      theta[k] = io.out_std.empty() ? y(r, k) : io.out_mean[k] + io.out_std[k] * y(r, k);
    }
    float* g = want_grad ? dy.mutable_data().data() + r * body::kPoseDim : nullptr;
    const SampleTerms t = sample_terms(target, theta, batch.goals.row(r), batch.params.row(r), cfg, scale, g, s);
    if (g != nullptr && !io.out_std.empty()) {
      for (std::size_t k = 0; k < body::kPoseDim; ++k) g[k] *= io.out_std[k];
    }
    loss += cfg.lambda_vertex * t.l1 + cfg.lambda_reg * t.sq;
  }
  loss /= static_cast<double>(rows);
  if (want_grad) tape.backward(net, numkit::as_matrix(dy), grad);
  return loss;
}

// Network equal to io.out(net(io.in(x))), up to rounding.
Network fold(const Network& net, const Affine& io) {
  Network f = net;
  const std::size_t last = net.num_layers() - 1;
  numkit::MatView w0 = f.weight(0);
  std::span<float> b0 = f.bias(0);
  for (std::size_t j = 0; j < w0.cols; ++j) {
    double shift = 0.0;
    for (std::size_t i = 0; i < w0.rows; ++i) shift += static_cast<double>(io.in_mean[i]) * io.in_inv_std[i] * net.weight(0)(i, j);
    b0[j] = static_cast<float>(b0[j] - shift);
  }
  for (std::size_t i = 0; i < w0.rows; ++i) {
    for (std::size_t j = 0; j < w0.cols; ++j) w0(i, j) *= io.in_inv_std[i];
  }
  numkit::MatView wl = f.weight(last);
  std::span<float> bl = f.bias(last);
  for (std::size_t i = 0; i < wl.rows; ++i) {
    for (std::size_t k = 0; k < wl.cols; ++k) wl(i, k) *= io.out_std[k];
  }
  for (std::size_t k = 0; k < wl.cols; ++k) bl[k] = io.out_mean[k] + io.out_std[k] * bl[k];
  return f;
}

// Column means and standard deviations of m (std floored at floor).
void column_stats(numkit::ConstMatView m, float floor, std::vector<float>& mean, std::vector<float>& stdev) {
  mean.assign(m.cols, 0.0f);
  stdev.assign(m.cols, 0.0f);
  for (std::size_t j = 0; j < m.cols; ++j) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) s += m(i, j);
    const double mu = s / static_cast<double>(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) s2 += (m(i, j) - mu) * (m(i, j) - mu);
    mean[j] = static_cast<float>(mu);
    stdev[j] = std::max(floor, static_cast<float>(std::sqrt(s2 / static_cast<double>(m.rows))));
  }
}

}  // namespace

double conversion_loss(const Network& net, const ConversionBatch& batch, const body::BodyTemplate& target,
                       const TrainConfig& cfg, std::span<float> grad) {
  return batch_loss(net, batch, target, cfg, {}, grad);
}

ProjectorEvaluation evaluate_projector(const Network& net, const ConversionBatch& all, const body::BodyTemplate& target,
                                       const TrainConfig& cfg) {
  check_batch(net, all, target);
  NetworkTape tape;
  tape.forward(net, all.inputs);
  const numkit::ConstMatView y = tape.output();
  SkinScratch s;
  ProjectorEvaluation e;
  for (std::size_t r = 0; r < all.inputs.rows; ++r) {
    const SampleTerms t = sample_terms(target, y.row(r), all.goals.row(r), all.params.row(r), cfg, 1.0f, nullptr, s);
    e.vertex_err += t.dist;
    e.param_mse += t.sq;
    e.loss += cfg.lambda_vertex * t.l1 + cfg.lambda_reg * t.sq;
  }
  const double n = static_cast<double>(all.inputs.rows);
  e.vertex_err /= n;
  e.param_mse /= n;
  e.loss /= n;
  return e;
}

namespace {

// Network inputs and bridged goal meshes for every sample.
struct Prepared {
  numkit::Array inputs, goals;
  ConversionBatch view(const ProjectionDataset& d) const {
    return {numkit::as_matrix(inputs), numkit::as_matrix(goals), numkit::as_matrix(d.params)};
  }
};

Prepared prepare(const ProjectionDataset& d, Projector& proj) {
  const std::size_t n = d.size();
  const std::size_t ns = d.source.dim(1);
  const std::size_t nt3 = 3 * proj.bridge().target_vertices();
  Prepared p{numkit::Array({n, proj.input_dim()}), numkit::Array({n, nt3})};
  for (std::size_t i = 0; i < n; ++i) {
    const auto mesh = d.source.data().subspan(i * ns, ns);
    proj.prepare_input(mesh, p.inputs.mutable_data().subspan(i * proj.input_dim(), proj.input_dim()));
    proj.bridge().apply(mesh, p.goals.mutable_data().subspan(i * nt3, nt3));
  }
  return p;
}

}  // namespace

TrainResult train_projector(const ProjectionDataset& train, const ProjectionDataset& heldout, const Bridge& bridge,
                            const body::BodyTemplate& target, const TrainConfig& cfg, const ProjectorShape& shape) {
  cfg.validate();
  train.validate();
  heldout.validate();
  if (train.size() == 0 || heldout.size() == 0) throw ConfigError("train: training and held-out sets must be nonempty");
  if (train.source.dim(1) != 3 * bridge.source_vertices() || heldout.source.dim(1) != 3 * bridge.source_vertices()) {
    throw ShapeError("train: dataset meshes do not match the bridge's source topology");
  }
  if (bridge.target_vertices() != target.num_vertices()) throw ShapeError("train: bridge does not match the target model");

  TrainResult result;
  result.weights = ProjectorWeights::random(target.num_vertices(), cfg.seed, shape);
  Network net = result.weights.net;
  Projector proj(bridge, result.weights);
  Prepared tr = prepare(train, proj);
  const Prepared ho = prepare(heldout, proj);
  const ConversionBatch held_all = ho.view(heldout);

  // Train in standardized coordinates; the maps are folded into the first
  // and last layers whenever weights are read out.
  Affine io;
  const std::size_t n = train.size();
  const bool standardize = cfg.standardize && n > 1;
  if (standardize) {
    std::vector<float> in_std;
    column_stats(numkit::as_matrix(tr.inputs), 1e-6f, io.in_mean, in_std);
    io.in_inv_std.resize(in_std.size());
    for (std::size_t i = 0; i < in_std.size(); ++i) io.in_inv_std[i] = 1.0f / in_std[i];
    column_stats(numkit::as_matrix(train.params), 1e-3f, io.out_mean, io.out_std);
    numkit::MatView x = numkit::as_matrix(tr.inputs);
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t c = 0; c < x.cols; ++c) x(r, c) = (x(r, c) - io.in_mean[c]) * io.in_inv_std[c];
    }
  }
  const ConversionBatch train_all = tr.view(train);
  auto exported = [&] { return standardize ? fold(net, io) : net; };

  auto record = [&](std::size_t epoch, double train_loss) {
    Network out = exported();
    const ProjectorEvaluation e = evaluate_projector(out, held_all, target, cfg);
    result.curve.push_back({epoch, train_loss, e.vertex_err, e.param_mse});
    if (epoch == 0 || e.vertex_err < result.curve[result.best_epoch].heldout_vertex_err) {
      result.best_epoch = epoch;
      result.weights.net = std::move(out);
    }
  };
  record(0, batch_loss(net, train_all, target, cfg, io, {}));

  const std::size_t batches = (n + cfg.batch - 1) / cfg.batch;
  const double total_steps = static_cast<double>(batches * cfg.epochs);
  numkit::Adam adam(net.parameters().size(), {.lr = cfg.lr});
  std::vector<float> grad(net.parameters().size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0x5eedba7c4ULL);
  numkit::Array xb, gb, pb;
  double first_loss = 0.0;
  std::size_t over = 0, step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch, hi = std::min(n, lo + cfg.batch);
      const std::size_t rows = hi - lo;
      if (xb.empty() || xb.dim(0) != rows) {
        xb = numkit::Array({rows, train_all.inputs.cols});
        gb = numkit::Array({rows, train_all.goals.cols});
        pb = numkit::Array({rows, body::kPoseDim});
      }
      for (std::size_t i = 0; i < rows; ++i) {
        copy_row(train_all.inputs, order[lo + i], numkit::as_matrix(xb), i);
        copy_row(train_all.goals, order[lo + i], numkit::as_matrix(gb), i);
        copy_row(train_all.params, order[lo + i], numkit::as_matrix(pb), i);
      }
      const double loss = batch_loss(net, {numkit::as_matrix(xb), numkit::as_matrix(gb), numkit::as_matrix(pb)},
                                     target, cfg, io, grad);
      if (!std::isfinite(loss)) {
        throw NumericError("train: loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
      }
      if (step == 0) first_loss = loss;
      over = loss > cfg.divergence_factor * first_loss ? over + 1 : 0;
      if (over >= cfg.divergence_patience) {
        std::ostringstream msg;
        msg << "train: diverged, loss " << loss << " above " << cfg.divergence_factor << "x the initial " << first_loss
            << " for " << over << " consecutive steps (epoch " << epoch << ")";
        throw NumericError(msg.str());
      }
      const double decay = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
      adam.set_lr(static_cast<float>(cfg.lr * decay));
      adam.step(net.parameters(), grad);
      epoch_loss += loss * static_cast<double>(rows);
      ++step;
    }
    record(epoch, epoch_loss / static_cast<double>(n));
  }
  return result;
}

}  // namespace fsb::projection
