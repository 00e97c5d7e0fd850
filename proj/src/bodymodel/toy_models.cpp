#include "fsb/bodymodel/toy_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "fsb/bodymodel/geometry.hpp"
#include "fsb/bodymodel/pose.hpp"
#include "fsb/error.hpp"

namespace fsb::body {
namespace {

constexpr std::size_t kMhrAround = 8;
constexpr std::size_t kSmplAround = 4;
constexpr double kSkinSigma = 0.04;
constexpr double kWeightCutoff = 1e-3;
constexpr double kMinFaceClearance = 1e-4;

const double kJoints[kNumJoints][3] = {
    {0, 0, 0},         {0.09, 0.05, 0},   {-0.09, 0.05, 0},  {0, -0.10, 0},     {0.10, 0.45, 0},    {-0.10, 0.45, 0},
    {0, -0.22, 0},     {0.10, 0.85, 0},   {-0.10, 0.85, 0},  {0, -0.34, 0},     {0, -0.50, 0},      {0.07, -0.45, 0},
    {-0.07, -0.45, 0}, {0, -0.60, 0},     {0.18, -0.45, 0},  {-0.18, -0.45, 0}, {0.45, -0.45, 0},   {-0.45, -0.45, 0},
    {0.70, -0.45, 0},  {-0.70, -0.45, 0}, {0.78, -0.45, 0},  {-0.78, -0.45, 0}};
const int kParents[kNumJoints] = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 9, 9, 9, 10, 11, 12, 14, 15, 16, 17, 18, 19};

struct Tip {
  std::size_t joint;
  double end[3];
};
const Tip kTips[] = {{7, {0.10, 0.92, -0.12}},
                     {8, {-0.10, 0.92, -0.12}},
                     {13, {0, -0.80, 0}},
                     {20, {0.88, -0.45, 0}},
                     {21, {-0.88, -0.45, 0}}};

const std::uint32_t kCorrectiveJoints[] = {4, 5, 16, 17, 1, 2, 14, 15};

Vec3d sub(const Vec3d& a, const Vec3d& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3d& a, const Vec3d& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3d cross(const Vec3d& a, const Vec3d& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3d normalized(const Vec3d& a) {
  const double n = std::sqrt(dot(a, a));
  return {a[0] / n, a[1] / n, a[2] / n};
}

struct Segment {
  Vec3d a, b, dir, n1, n2;
  std::uint32_t owner = 0;
  double radius = 0.0;
  double length = 0.0;
  std::size_t mhr_rings = 2, smpl_rings = 2;
  std::uint32_t mhr_vertex0 = 0, mhr_face0 = 0;
};

double base_radius(std::size_t owner, std::size_t child) {
  if (owner == 0 || owner == 3 || owner == 6) return child == 1 || child == 2 ? 0.08 : 0.11;
  if (owner == 9) return child == 10 ? 0.05 : 0.06;
  if (owner == 13 || owner == 10) return 0.08;
  if (owner >= 18) return 0.035;
  if (owner == 7 || owner == 8) return 0.04;
  return 0.05;
}

std::vector<Segment> make_segments(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  std::vector<Segment> segs;
  auto add = [&](const double* a, const double* b, std::size_t owner, std::size_t child) {
    Segment s;
    s.a = {a[0], a[1], a[2]};
    s.b = {b[0], b[1], b[2]};
    s.owner = static_cast<std::uint32_t>(owner);
    s.length = std::sqrt(dot(sub(s.b, s.a), sub(s.b, s.a)));
    s.dir = normalized(sub(s.b, s.a));
    const Vec3d helper = std::fabs(s.dir[2]) < 0.9 ? Vec3d{0, 0, 1} : Vec3d{1, 0, 0};
    s.n1 = normalized(cross(s.dir, helper));
    s.n2 = cross(s.dir, s.n1);
    s.radius = base_radius(owner, child) * jitter(rng);
    segs.push_back(s);
  };
  for (std::size_t j = 1; j < kNumJoints; ++j) add(kJoints[kParents[j]], kJoints[j], static_cast<std::size_t>(kParents[j]), j);
  for (const Tip& t : kTips) add(kJoints[t.joint], t.end, t.joint, kNumJoints);
  return segs;
}

// Largest-remainder split of `total` rings, at least 2 per segment, by length.
std::vector<std::size_t> split_rings(const std::vector<Segment>& segs, std::size_t total) {
  const std::size_t n = segs.size();
  std::vector<std::size_t> rings(n, 2);
  const std::size_t extra = total - 2 * n;
  double sum_len = 0.0;
  for (const auto& s : segs) sum_len += s.length;
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double share = static_cast<double>(extra) * segs[i].length / sum_len;
    const auto whole = static_cast<std::size_t>(std::floor(share));
    rings[i] += whole;
    used += whole;
    rem.emplace_back(share - static_cast<double>(whole), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t k = 0; used < extra; ++k, ++used) ++rings[rem[k % n].second];
  return rings;
}

double ring_t(std::size_t i, std::size_t rings) { return 0.02 + 0.96 * static_cast<double>(i) / static_cast<double>(rings - 1); }

double point_segment_dist(const Vec3d& p, const Segment& s) {
  const Vec3d ap = sub(p, s.a);
  const double t = std::clamp(dot(ap, sub(s.b, s.a)) / (s.length * s.length), 0.0, 1.0);
  const Vec3d q = {s.a[0] + t * (s.b[0] - s.a[0]) - p[0], s.a[1] + t * (s.b[1] - s.a[1]) - p[1],
                   s.a[2] + t * (s.b[2] - s.a[2]) - p[2]};
  return std::sqrt(dot(q, q));
}

// Converts to float and nudges the last nonzero entry until the float sum,
// accumulated in index order from zero, is exactly 1.
void normalize_exact(const std::vector<double>& raw, float* out, std::size_t n) {
  double total = 0.0;
  for (double r : raw) total += r;
  std::size_t last = n;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = static_cast<float>(raw[j] / total);
    if (out[j] != 0.0f) last = j;
  }
  if (last == n) throw UsageError("vertex has no skinning influence");
  for (int iter = 0; iter < 64; ++iter) {
    float sum = 0.0f;
    for (std::size_t j = 0; j < n; ++j) sum += out[j];
    if (sum == 1.0f) return;
    const float fixed = static_cast<float>(static_cast<double>(out[last]) - (static_cast<double>(sum) - 1.0));
    out[last] = fixed != out[last] ? fixed : std::nextafter(out[last], sum > 1.0f ? 0.0f : 2.0f);
    if (!(out[last] > 0.0f)) break;
  }
  throw NumericError("could not normalize skinning weights exactly");
}

void set_skeleton(BodyTemplate& t) {
  t.parents.assign(kParents, kParents + kNumJoints);
  t.joints_rest = toy_rest_joints();
}

Vec3d to_d(const float* p) { return {p[0], p[1], p[2]}; }

}  // namespace

const numkit::Array& toy_rest_joints() {
  static const numkit::Array joints = [] {
    numkit::Array a({kNumJoints, 3});
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      for (std::size_t d = 0; d < 3; ++d) a.mutable_data()[3 * j + d] = static_cast<float>(kJoints[j][d]);
    }
    return a;
  }();
  return joints;
}

const std::vector<int>& toy_parents() {
  static const std::vector<int> parents(kParents, kParents + kNumJoints);
  return parents;
}

ToyModels make_toy_models(std::uint64_t seed, ToySizes sizes) {
  std::mt19937_64 rng(seed);
  std::vector<Segment> segs = make_segments(rng);
  const std::size_t nseg = segs.size();
  if (sizes.smpl_vertices >= sizes.mhr_vertices) throw UsageError("toy models: mhr vertex count must exceed smpl count");
  if (sizes.mhr_vertices < 2 * kMhrAround * nseg) {
    throw UsageError("toy models: need at least " + std::to_string(2 * kMhrAround * nseg) + " mhr vertices");
  }
  if (sizes.smpl_vertices < 2 * kSmplAround * nseg) {
    throw UsageError("toy models: need at least " + std::to_string(2 * kSmplAround * nseg) + " smpl vertices");
  }
  if (sizes.correctives > std::size(kCorrectiveJoints)) throw UsageError("toy models: at most 8 corrective directions");

  ToyModels out;
  BodyTemplate& mhr = out.mhr;
  BodyTemplate& smpl = out.smpl;
  mhr.name = "mhr";
  smpl.name = "smpl";
  set_skeleton(mhr);
  set_skeleton(smpl);

  // Dense tube mesh.
  const std::size_t nv = sizes.mhr_vertices;
  const std::size_t mhr_rings_total = nv / kMhrAround;
  const std::size_t caps = nv - mhr_rings_total * kMhrAround;
  const auto mhr_rings = split_rings(segs, mhr_rings_total);
  std::uniform_real_distribution<double> noise(-0.003, 0.003);
  std::uniform_real_distribution<double> twist(0.0, 2.0 * std::numbers::pi / kMhrAround);
  std::vector<Vec3d> pos;
  std::vector<Vec3d> radial;
  std::vector<std::pair<std::size_t, double>> seg_t;  // segment, axial parameter
  for (std::size_t s = 0; s < nseg; ++s) {
    Segment& g = segs[s];
    g.mhr_rings = mhr_rings[s];
    g.mhr_vertex0 = static_cast<std::uint32_t>(pos.size());
    const double phase = twist(rng);
    for (std::size_t i = 0; i < g.mhr_rings; ++i) {
      const double t = ring_t(i, g.mhr_rings);
      for (std::size_t q = 0; q < kMhrAround; ++q) {
        const double phi = phase + 2.0 * std::numbers::pi * static_cast<double>(q) / kMhrAround;
        Vec3d r;
        for (int d = 0; d < 3; ++d) r[d] = std::cos(phi) * g.n1[d] + std::sin(phi) * g.n2[d];
        Vec3d p;
        for (int d = 0; d < 3; ++d) p[d] = g.a[d] + t * (g.b[d] - g.a[d]) + g.radius * r[d] + noise(rng);
        pos.push_back(p);
        radial.push_back(r);
        seg_t.emplace_back(s, t);
      }
    }
  }
  for (std::size_t s = 0; s < nseg; ++s) {
    Segment& g = segs[s];
    g.mhr_face0 = static_cast<std::uint32_t>(mhr.faces.size());
    for (std::size_t i = 0; i + 1 < g.mhr_rings; ++i) {
      for (std::size_t q = 0; q < kMhrAround; ++q) {
        const auto v = [&](std::size_t ii, std::size_t qq) {
          return static_cast<std::uint32_t>(g.mhr_vertex0 + ii * kMhrAround + qq % kMhrAround);
        };
        mhr.faces.push_back({v(i, q), v(i + 1, q), v(i + 1, q + 1)});
        mhr.faces.push_back({v(i, q), v(i + 1, q + 1), v(i, q + 1)});
      }
    }
  }
  for (std::size_t c = 0; c < caps; ++c) {
    const Segment& g = segs[c % nseg];
    const auto center = static_cast<std::uint32_t>(pos.size());
    const double t = 1.0 + 0.05 * static_cast<double>(c / nseg);
    pos.push_back({g.a[0] + t * (g.b[0] - g.a[0]), g.a[1] + t * (g.b[1] - g.a[1]), g.a[2] + t * (g.b[2] - g.a[2])});
    radial.push_back(g.dir);
    seg_t.emplace_back(c % nseg, t);
    const auto last = static_cast<std::uint32_t>(g.mhr_vertex0 + (g.mhr_rings - 1) * kMhrAround);
    for (std::uint32_t q = 0; q < kMhrAround; ++q) mhr.faces.push_back({center, last + q, last + (q + 1) % static_cast<std::uint32_t>(kMhrAround)});
  }

  mhr.vertices_rest = numkit::Array({nv, 3});
  for (std::size_t v = 0; v < nv; ++v) {
    for (int d = 0; d < 3; ++d) mhr.vertices_rest.mutable_data()[3 * v + d] = static_cast<float>(pos[v][d]);
  }

  // Skinning: Gaussian falloff in distance to each owning bone segment.
  mhr.skin_weights = numkit::Array({nv, kNumJoints});
  for (std::size_t v = 0; v < nv; ++v) {
    std::vector<double> dist(nseg);
    double dmin = 1e300;
    for (std::size_t s = 0; s < nseg; ++s) {
      dist[s] = point_segment_dist(pos[v], segs[s]);
      dmin = std::min(dmin, dist[s]);
    }
    std::vector<double> raw(kNumJoints, 0.0);
    for (std::size_t s = 0; s < nseg; ++s) {
      const double z = (dist[s] - dmin) / kSkinSigma;
      raw[segs[s].owner] += std::exp(-0.5 * z * z);
    }
    double total = 0.0;
    for (double r : raw) total += r;
    for (double& r : raw) {
      if (r / total < kWeightCutoff) r = 0.0;
    }
    normalize_exact(raw, mhr.skin_weights.mutable_data().data() + v * kNumJoints, kNumJoints);
  }

  // Shape basis: smooth radial offsets per segment.
  mhr.shape_basis = numkit::Array({nv, 3, kShapeDim});
  {
    std::normal_distribution<double> gain(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<double> g(kShapeDim * nseg), ph(kShapeDim * nseg);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = gain(rng);
      ph[i] = phase(rng);
    }
    for (std::size_t v = 0; v < nv; ++v) {
      const auto [s, t] = seg_t[v];
      for (std::size_t k = 0; k < kShapeDim; ++k) {
        const double amp = k == 0 ? 0.02
                                  : 0.012 * g[k * nseg + s] *
                                        std::cos(std::numbers::pi * static_cast<double>(k % 3 + 1) * t + ph[k * nseg + s]);
        for (int d = 0; d < 3; ++d) {
          mhr.shape_basis.mutable_data()[(v * 3 + static_cast<std::size_t>(d)) * kShapeDim + k] =
              static_cast<float>(amp * radial[v][d]);
        }
      }
    }
  }

  // Correctives: orthonormal random directions in R^{3 N_v}.
  const std::size_t nc = sizes.correctives;
  if (nc > 0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> dirs;
    for (std::size_t k = 0; k < nc; ++k) {
      std::vector<double> d(3 * nv);
      for (double& x : d) x = gauss(rng);
      for (const auto& prev : dirs) {
        double p = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) p += d[i] * prev[i];
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= p * prev[i];
      }
      double n = 0.0;
      for (double x : d) n += x * x;
      n = std::sqrt(n);
      for (double& x : d) x /= n;
      dirs.push_back(std::move(d));
    }
    mhr.correctives = numkit::Array({nv, 3, nc});
    for (std::size_t i = 0; i < 3 * nv; ++i) {
      for (std::size_t k = 0; k < nc; ++k) mhr.correctives.mutable_data()[i * nc + k] = static_cast<float>(dirs[k][i]);
    }
    mhr.corrective_joints.assign(kCorrectiveJoints, kCorrectiveJoints + nc);
  }
  mhr.finalize();

  // Coarse topology, sampled on the dense faces.
  const std::size_t nt = sizes.smpl_vertices;
  const std::size_t smpl_rings_total = nt / kSmplAround;
  const std::size_t smpl_extra = nt - smpl_rings_total * kSmplAround;
  const auto smpl_rings = split_rings(segs, smpl_rings_total);
  const float* mv = mhr.vertices_rest.data().data();

  BaryMap& gt = out.ground_truth;
  gt.weights = numkit::Array({nt, 3});
  std::vector<float> smpl_pos;
  smpl_pos.reserve(3 * nt);

  auto clearance_ok = [&](const float* p, std::uint32_t own_face) {
    const Vec3d pd = to_d(p);
    for (std::size_t f = 0; f < mhr.faces.size(); ++f) {
      if (f == own_face) continue;
      const Face& fc = mhr.faces[f];
      const auto tp = closest_point_on_triangle(pd, to_d(mv + 3 * fc[0]), to_d(mv + 3 * fc[1]), to_d(mv + 3 * fc[2]));
      if (tp.dist2 < kMinFaceClearance * kMinFaceClearance) return false;
    }
    return true;
  };

  // Places one sample in quad (band, q) of segment g at local (u, v); returns
  // false if it violates clearance.
  auto place = [&](const Segment& g, std::size_t band, std::size_t q, double u, double v) {
    const std::uint32_t quad_face = g.mhr_face0 + static_cast<std::uint32_t>((band * kMhrAround + q) * 2);
    std::uint32_t face;
    std::array<float, 3> w;
    if (u > v) {
      face = quad_face;  // (c00, c10, c11)
      w = {static_cast<float>(1.0 - u), static_cast<float>(u - v), static_cast<float>(v)};
    } else {
      face = quad_face + 1;  // (c00, c11, c01)
      w = {static_cast<float>(1.0 - v), static_cast<float>(u), static_cast<float>(v - u)};
    }
    const Face& fc = mhr.faces[face];
    float p[3];
    for (int d = 0; d < 3; ++d) p[d] = (w[0] * mv[3 * fc[0] + d] + w[1] * mv[3 * fc[1] + d]) + w[2] * mv[3 * fc[2] + d];
    if (!clearance_ok(p, face)) return false;
    const std::size_t t = gt.face.size();
    gt.face.push_back(face);
    for (int k = 0; k < 3; ++k) gt.weights.mutable_data()[3 * t + k] = w[k];
    smpl_pos.insert(smpl_pos.end(), p, p + 3);
    return true;
  };

  auto sample = [&](const Segment& g, double t_axis, std::size_t q_pref, double v_pref) {
    const std::size_t bands = g.mhr_rings - 1;
    double x = (t_axis - 0.02) / 0.96 * static_cast<double>(bands);
    auto band = static_cast<std::size_t>(std::clamp(std::floor(x), 0.0, static_cast<double>(bands - 1)));
    const double u0 = std::clamp(x - static_cast<double>(band), 0.15, 0.85);
    const double us[] = {u0, std::clamp(u0 + 0.1, 0.15, 0.85), std::clamp(u0 - 0.1, 0.15, 0.85), 0.5, 0.3, 0.7};
    const double vs[] = {v_pref, 0.35, 0.65, 0.5};
    for (std::size_t dq = 0; dq < kMhrAround; ++dq) {
      for (double v : vs) {
        for (double u : us) {
          if (std::fabs(u - v) < 0.1) continue;
          if (place(g, band, (q_pref + dq) % kMhrAround, u, v)) return;
        }
      }
    }
    throw UsageError("toy models: could not place a coarse vertex with enough clearance");
  };

  std::uniform_real_distribution<double> vjit(0.3, 0.7);
  std::vector<std::uint32_t> smpl_ring0(nseg);
  for (std::size_t s = 0; s < nseg; ++s) {
    const Segment& g = segs[s];
    const std::size_t rings = smpl_rings[s];
    smpl_ring0[s] = static_cast<std::uint32_t>(gt.face.size());
    for (std::size_t k = 0; k < rings; ++k) {
      const double t_axis = 0.02 + 0.96 * (static_cast<double>(k) + 0.5) / static_cast<double>(rings);
      for (std::size_t a = 0; a < kSmplAround; ++a) sample(g, t_axis, 2 * a + (k % 2), vjit(rng));
    }
    for (std::size_t k = 0; k + 1 < rings; ++k) {
      for (std::size_t a = 0; a < kSmplAround; ++a) {
        const auto v = [&](std::size_t kk, std::size_t aa) {
          return static_cast<std::uint32_t>(smpl_ring0[s] + kk * kSmplAround + aa % kSmplAround);
        };
        smpl.faces.push_back({v(k, a), v(k + 1, a), v(k + 1, a + 1)});
        smpl.faces.push_back({v(k, a), v(k + 1, a + 1), v(k, a + 1)});
      }
    }
  }
  for (std::size_t e = 0; e < smpl_extra; ++e) {
    const std::size_t s = e % nseg;
    const auto center = static_cast<std::uint32_t>(gt.face.size());
    sample(segs[s], 0.02 + 0.96 * 0.5 / static_cast<double>(smpl_rings[s]), 1, 0.5);
    for (std::uint32_t a = 0; a < kSmplAround; ++a) {
      smpl.faces.push_back({center, smpl_ring0[s] + a, smpl_ring0[s] + (a + 1) % static_cast<std::uint32_t>(kSmplAround)});
    }
  }

  smpl.vertices_rest = numkit::Array({nt, 3}, std::move(smpl_pos));

  // Everything else on the coarse mesh is interpolated from the dense one.
  auto interp = [&](std::size_t t, const float* src, std::size_t stride, std::size_t col) {
    const Face& fc = mhr.faces[gt.face[t]];
    const float* w = gt.weights.data().data() + 3 * t;
    return static_cast<double>(w[0]) * src[fc[0] * stride + col] + static_cast<double>(w[1]) * src[fc[1] * stride + col] +
           static_cast<double>(w[2]) * src[fc[2] * stride + col];
  };
  smpl.skin_weights = numkit::Array({nt, kNumJoints});
  smpl.shape_basis = numkit::Array({nt, 3, kShapeDim});
  if (nc > 0) smpl.correctives = numkit::Array({nt, 3, nc});
  for (std::size_t t = 0; t < nt; ++t) {
    std::vector<double> raw(kNumJoints);
    for (std::size_t j = 0; j < kNumJoints; ++j) raw[j] = interp(t, mhr.skin_weights.data().data(), kNumJoints, j);
    normalize_exact(raw, smpl.skin_weights.mutable_data().data() + t * kNumJoints, kNumJoints);
    for (std::size_t c = 0; c < 3 * kShapeDim; ++c) {
      smpl.shape_basis.mutable_data()[t * 3 * kShapeDim + c] =
          static_cast<float>(interp(t, mhr.shape_basis.data().data(), 3 * kShapeDim, c));
    }
    for (std::size_t c = 0; c < 3 * nc; ++c) {
      smpl.correctives.mutable_data()[t * 3 * nc + c] = static_cast<float>(interp(t, mhr.correctives.data().data(), 3 * nc, c));
    }
  }
  smpl.corrective_joints = mhr.corrective_joints;
  smpl.finalize();
  return out;
}

}  // namespace fsb::body
