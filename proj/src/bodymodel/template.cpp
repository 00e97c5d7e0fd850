#include "fsb/bodymodel/template.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fsb/bodymodel/pose.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/fsb_io.hpp"

namespace fsb::body {

void BodyTemplate::finalize() {
  const std::size_t nv = vertices_rest.dim(0);
  const std::size_t nj = parents.size();
  if (skin_weights.rank() != 2 || skin_weights.dim(0) != nv || skin_weights.dim(1) != nj) {
    throw ShapeError(name + ": skin weights must be N_v x N_j");
  }
  sparse = {};
  sparse.offsets.reserve(nv + 1);
  sparse.offsets.push_back(0);
  for (std::size_t v = 0; v < nv; ++v) {
    for (std::size_t j = 0; j < nj; ++j) {
      const float w = skin_weights.at(v, j);
      if (w == 0.0f) continue;
      sparse.joints.push_back(static_cast<std::uint32_t>(j));
      sparse.weights.push_back(w);
    }
    sparse.offsets.push_back(static_cast<std::uint32_t>(sparse.joints.size()));
  }
  validate();
}

void BodyTemplate::validate() const {
  const std::string who = name.empty() ? "template" : name;
  if (vertices_rest.rank() != 2 || vertices_rest.dim(1) != 3) throw ShapeError(who + ": vertices must be N_v x 3");
  const std::size_t nv = vertices_rest.dim(0);
  const std::size_t nj = parents.size();
  if (nj == 0 || parents[0] != -1) throw ShapeError(who + ": joint 0 must be the root");
  for (std::size_t j = 1; j < nj; ++j) {
    if (parents[j] < 0 || static_cast<std::size_t>(parents[j]) >= j) {
      throw ShapeError(who + ": parent of joint " + std::to_string(j) + " must precede it");
    }
  }
  if (joints_rest.rank() != 2 || joints_rest.dim(0) != nj || joints_rest.dim(1) != 3) {
    throw ShapeError(who + ": rest joints must be N_j x 3");
  }
  for (const Face& f : faces) {
    for (auto i : f) {
      if (i >= nv) throw ShapeError(who + ": face index out of range");
    }
  }
  if (skin_weights.rank() != 2 || skin_weights.dim(0) != nv || skin_weights.dim(1) != nj) {
    throw ShapeError(who + ": skin weights must be N_v x N_j");
  }
  for (std::size_t v = 0; v < nv; ++v) {
    double sum = 0.0;
    for (std::size_t j = 0; j < nj; ++j) {
      const float w = skin_weights.at(v, j);
      if (!(w >= 0.0f)) throw ShapeError(who + ": negative skin weight at vertex " + std::to_string(v));
      sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-5) throw ShapeError(who + ": skin weights of vertex " + std::to_string(v) + " do not sum to 1");
  }
  if (shape_basis.shape() != numkit::Shape{nv, 3, kShapeDim}) throw ShapeError(who + ": shape basis must be N_v x 3 x 10");
  if (!corrective_joints.empty()) {
    if (correctives.shape() != numkit::Shape{nv, 3, corrective_joints.size()}) {
      throw ShapeError(who + ": corrective basis must be N_v x 3 x N_c");
    }
    for (auto j : corrective_joints) {
      if (j >= nj) throw ShapeError(who + ": corrective joint out of range");
    }
  }
  if (sparse.offsets.size() != nv + 1) throw UsageError(who + ": finalize() has not been called");
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0f) || !(fy > 0.0f)) throw ConfigError("camera focal lengths must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw ConfigError("camera principal point must be finite");
}

void save_template(const std::filesystem::path& dir, const BodyTemplate& t) {
  t.validate();
  numkit::ArrayBundle bundle;
  bundle.put("vertices_rest", t.vertices_rest);
  bundle.put("joints_rest", t.joints_rest);
  bundle.put("skin_weights", t.skin_weights);
  bundle.put("shape_basis", t.shape_basis);
  if (!t.corrective_joints.empty()) bundle.put("correctives", t.correctives);
  numkit::save_bundle(dir, bundle);

  nlohmann::json side;
  side["name"] = t.name;
  side["parents"] = t.parents;
  side["num_vertices"] = t.num_vertices();
  side["num_joints"] = t.num_joints();
  side["num_faces"] = t.faces.size();
  side["faces"] = t.faces;
  side["corrective_joints"] = t.corrective_joints;
  std::ofstream f(dir / "template.json");
  if (!f) throw IoError("cannot write " + (dir / "template.json").string());
  f << side.dump() << '\n';
}

BodyTemplate load_template(const std::filesystem::path& dir) {
  std::ifstream f(dir / "template.json");
  if (!f) throw IoError("cannot open " + (dir / "template.json").string());
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "template.json").string() + ": " + e.what());
  }
  const numkit::ArrayBundle bundle = numkit::load_bundle(dir);
  BodyTemplate t;
  t.name = side.at("name").get<std::string>();
  t.parents = side.at("parents").get<std::vector<int>>();
  t.faces = side.at("faces").get<std::vector<Face>>();
  t.corrective_joints = side.at("corrective_joints").get<std::vector<std::uint32_t>>();
  t.vertices_rest = bundle.get("vertices_rest");
  t.joints_rest = bundle.get("joints_rest");
  t.skin_weights = bundle.get("skin_weights");
  t.shape_basis = bundle.get("shape_basis");
  if (!t.corrective_joints.empty()) t.correctives = bundle.get("correctives");
  if (side.at("num_vertices").get<std::size_t>() != t.num_vertices()) {
    throw IoError(dir.string() + ": vertex count in template.json disagrees with arrays");
  }
  t.finalize();
  return t;
}

}  // namespace fsb::body
