#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fsb/bodymodel/template.hpp"
#include "fsb/numkit/array.hpp"

namespace fsb::projection {

struct BaryDiagnostics {
  // Target vertices whose closest source face had zero area. Each was mapped
  // onto that face's longest edge.
  std::vector<std::uint32_t> degenerate_vertices;
  std::vector<std::uint32_t> degenerate_faces;  // parallel to degenerate_vertices
  double max_distance = 0.0;                    // target vertex to its mapped point
};

struct BaryResult {
  body::BaryMap map;
  BaryDiagnostics diagnostics;
};

// For every target rest vertex, the closest point over all source rest faces
// in barycentric form. Ties go to the lowest face index.
BaryResult precompute_bary(const body::BodyTemplate& source, const body::BodyTemplate& target);

// UsageError unless weights are nonnegative, rows sum to 1 within 1e-6 and
// face indices are below num_faces.
void validate_bary(const body::BaryMap& map, std::size_t num_faces);

// Source-to-target vertex transfer through a fixed barycentric map.
class Bridge {
 public:
  Bridge() = default;
  Bridge(body::BaryMap map, std::vector<body::Face> source_faces, std::size_t source_vertices);
  Bridge(body::BaryMap map, const body::BodyTemplate& source);

  std::size_t source_vertices() const { return source_vertices_; }
  std::size_t target_vertices() const { return map_.size(); }
  const body::BaryMap& map() const { return map_; }
  std::span<const body::Face> source_faces() const { return faces_; }

  // source: N_src x 3 flat, out: N_t x 3 flat. ShapeError on size mismatch.
  void apply(std::span<const float> source, std::span<float> out) const;
  numkit::Array apply(const numkit::Array& source) const;

 private:
  body::BaryMap map_;
  std::vector<body::Face> faces_;
  std::size_t source_vertices_ = 0;
};

// Bundle directory with arrays "face" (N_t, stored as float) and "weights".
void save_bary(const std::filesystem::path& dir, const body::BaryMap& map);
body::BaryMap load_bary(const std::filesystem::path& dir);

}  // namespace fsb::projection
