#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fsb/numkit/array.hpp"

namespace fsb::body {

using Face = std::array<std::uint32_t, 3>;

// Per-vertex nonzero skinning weights in ascending joint order.
struct SparseWeights {
  std::vector<std::uint32_t> offsets;  // size N_v + 1
  std::vector<std::uint32_t> joints;
  std::vector<float> weights;
};

struct BodyTemplate {
  std::string name;
  numkit::Array vertices_rest;  // N_v x 3
  std::vector<Face> faces;
  std::vector<int> parents;     // parents[0] == -1, parents[j] < j
  numkit::Array joints_rest;    // N_j x 3
  numkit::Array skin_weights;   // N_v x N_j
  numkit::Array shape_basis;    // N_v x 3 x 10
  numkit::Array correctives;    // N_v x 3 x N_c, empty when the model has none
  std::vector<std::uint32_t> corrective_joints;  // N_c driving joints
  SparseWeights sparse;         // derived from skin_weights by finalize()

  std::size_t num_vertices() const { return vertices_rest.dim(0); }
  std::size_t num_joints() const { return parents.size(); }
  std::size_t num_correctives() const { return corrective_joints.size(); }

  // Rebuilds derived data and checks every invariant; throws on violation.
  void finalize();
  void validate() const;
};

// Per-target-vertex source face and barycentric weights.
struct BaryMap {
  std::vector<std::uint32_t> face;
  numkit::Array weights;  // N_t x 3

  std::size_t size() const { return face.size(); }
};

struct CameraIntrinsics {
  float fx = 500.0f;
  float fy = 500.0f;
  float cx = 128.0f;
  float cy = 128.0f;

  // Row-major 3x3 K.
  std::array<float, 9> matrix() const { return {fx, 0, cx, 0, fy, cy, 0, 0, 1}; }
  void validate() const;
};

// Directory layout: template.json (name, parents, counts, faces,
// corrective joints) plus one FSB1 file per array.
void save_template(const std::filesystem::path& dir, const BodyTemplate& t);
BodyTemplate load_template(const std::filesystem::path& dir);

}  // namespace fsb::body
