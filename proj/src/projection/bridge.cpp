#include "fsb/projection/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsb/bodymodel/geometry.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/fsb_io.hpp"

namespace fsb::projection {
namespace {

body::Vec3d vertex_d(const numkit::Array& v, std::size_t i) {
  return {static_cast<double>(v.at(i, 0)), static_cast<double>(v.at(i, 1)), static_cast<double>(v.at(i, 2))};
}

}  // namespace

BaryResult precompute_bary(const body::BodyTemplate& source, const body::BodyTemplate& target) {
  if (source.faces.empty()) throw UsageError("precompute_bary: source template has no faces");
  const std::size_t nt = target.num_vertices();
  const std::size_t nf = source.faces.size();

  // Corners converted once; the search below is nf distance queries per target vertex.
  std::vector<std::array<body::Vec3d, 3>> corners(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      if (source.faces[f][k] >= source.num_vertices()) throw UsageError("precompute_bary: source face out of range");
      corners[f][k] = vertex_d(source.vertices_rest, source.faces[f][k]);
    }
  }

  BaryResult r;
  r.map.face.resize(nt);
  r.map.weights = numkit::Array({nt, 3});
  auto w = r.map.weights.mutable_data();
  for (std::size_t t = 0; t < nt; ++t) {
    const body::Vec3d p = vertex_d(target.vertices_rest, t);
    std::size_t best = 0;
    body::TrianglePoint best_pt;
    best_pt.dist2 = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < nf; ++f) {
      const auto tp = body::closest_point_on_triangle(p, corners[f][0], corners[f][1], corners[f][2]);
      if (tp.dist2 < best_pt.dist2) {
        best_pt = tp;
        best = f;
      }
    }
    r.map.face[t] = static_cast<std::uint32_t>(best);
    for (int k = 0; k < 3; ++k) w[3 * t + k] = std::max(0.0f, static_cast<float>(best_pt.bary[k]));
    if (best_pt.degenerate) {
      r.diagnostics.degenerate_vertices.push_back(static_cast<std::uint32_t>(t));
      r.diagnostics.degenerate_faces.push_back(static_cast<std::uint32_t>(best));
    }
    r.diagnostics.max_distance = std::max(r.diagnostics.max_distance, std::sqrt(best_pt.dist2));
  }
  return r;
}

void validate_bary(const body::BaryMap& map, std::size_t num_faces) {
  const std::size_t n = map.size();
  if (map.weights.rank() != 2 || map.weights.dim(0) != n || map.weights.dim(1) != 3) {
    throw UsageError("bary map: weights must be N_t x 3 with one row per face entry");
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (map.face[t] >= num_faces) {
      throw UsageError("bary map: vertex " + std::to_string(t) + " refers to face " + std::to_string(map.face[t]) +
                       " of " + std::to_string(num_faces));
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const float x = map.weights.at(t, k);
      if (!(x >= 0.0f)) throw UsageError("bary map: negative or NaN weight at vertex " + std::to_string(t));
      sum += x;
    }
    if (std::fabs(sum - 1.0) > 1e-6) throw UsageError("bary map: weights of vertex " + std::to_string(t) + " do not sum to 1");
  }
}

Bridge::Bridge(body::BaryMap map, std::vector<body::Face> source_faces, std::size_t source_vertices)
    : map_(std::move(map)), faces_(std::move(source_faces)), source_vertices_(source_vertices) {
  validate_bary(map_, faces_.size());
  for (const body::Face& f : faces_) {
    if (f[0] >= source_vertices_ || f[1] >= source_vertices_ || f[2] >= source_vertices_) {
      throw UsageError("bridge: source face refers to a missing vertex");
    }
  }
}

Bridge::Bridge(body::BaryMap map, const body::BodyTemplate& source)
    : Bridge(std::move(map), source.faces, source.num_vertices()) {}

void Bridge::apply(std::span<const float> source, std::span<float> out) const {
  if (source.size() != 3 * source_vertices_) {
    throw ShapeError("bridge: expected " + std::to_string(source_vertices_) + " source vertices, got " +
                     std::to_string(source.size()) + " floats");
  }
  body::apply_bary(map_, faces_, source, out);
}

numkit::Array Bridge::apply(const numkit::Array& source) const {
  numkit::Array out({target_vertices(), 3});
  apply(source.data(), out.mutable_data());
  return out;
}

void save_bary(const std::filesystem::path& dir, const body::BaryMap& map) {
  numkit::ArrayBundle b;
  numkit::Array face({map.size()});
  for (std::size_t i = 0; i < map.size(); ++i) face.mutable_data()[i] = static_cast<float>(map.face[i]);
  b.put("face", std::move(face));
  b.put("weights", map.weights);
  b.meta_json = R"({"kind":"bary_map"})";
  numkit::save_bundle(dir, b);
}

body::BaryMap load_bary(const std::filesystem::path& dir) {
  const numkit::ArrayBundle b = numkit::load_bundle(dir);
  body::BaryMap map;
  const numkit::Array& face = b.get("face");
  map.face.reserve(face.size());
  for (float f : face.data()) {
    if (!(f >= 0.0f) || f != std::floor(f) || f >= 16777216.0f) throw IoError(dir.string() + ": invalid face index");
    map.face.push_back(static_cast<std::uint32_t>(f));
  }
  map.weights = b.get("weights");
  if (map.weights.rank() != 2 || map.weights.dim(0) != map.size() || map.weights.dim(1) != 3) {
    throw IoError(dir.string() + ": weights must be N_t x 3");
  }
  return map;
}

}  // namespace fsb::projection
