#pragma once

#include "barrier_cert/certify.hpp"
#include "barrier_cert/nn.hpp"
#include "barrier_cert/partition.hpp"
#include "barrier_cert/sublevel.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace barrier_cert::io {

using json = nlohmann::json;

inline constexpr const char* kSchema = "barrier-cert/v1";

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InputError(what);
}

inline void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) require(ok.count(k) != 0, where + ": unknown key \"" + k + "\"");
}

inline void check_schema(const json& j, const std::string& where) {
  if (j.contains("schema")) {
    require(j["schema"].is_string() && j["schema"] == kSchema,
            where + ": unsupported schema (expected \"" + std::string(kSchema) + "\")");
  }
}

inline double number(const json& j, const std::string& where) {
  require(j.is_number(), where + ": expected a number");
  const double v = j.get<double>();
  require(std::isfinite(v), where + ": not finite");
  return v;
}

}  // namespace detail

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

inline Vector vector_from_json(const json& j, const std::string& where) {
  detail::require(j.is_array(), where + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = detail::number(j[i], where);
  return v;
}

/// Row-major; every row must have the same length.
inline Matrix matrix_from_json(const json& j, const std::string& where) {
  detail::require(j.is_array() && !j.empty(), where + ": expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    detail::require(j[i].is_array() && j[i].size() == cols, where + ": row " + std::to_string(i) + " has the wrong length");
    for (std::size_t k = 0; k < cols; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = detail::number(j[i][k], where);
    }
  }
  return m;
}

inline json to_json(const HyperRectangle& box) { return {{"lo", to_json(box.lo())}, {"hi", to_json(box.hi())}}; }

inline HyperRectangle box_from_json(const json& j, const std::string& where) {
  detail::only_keys(j, {"lo", "hi"}, where);
  detail::require(j.contains("lo") && j.contains("hi"), where + ": needs lo and hi");
  const Vector lo = vector_from_json(j["lo"], where + ".lo"), hi = vector_from_json(j["hi"], where + ".hi");
  detail::require(lo.size() == hi.size(), where + ": lo and hi differ in length");
  return {lo, hi};
}

inline json to_json(const NeuralNetwork& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"W", to_json(l.map.W)}, {"b", to_json(l.map.b)}, {"kind", to_string(l.kind)}});
  }
  return {{"schema", kSchema}, {"layers", layers}};
}

inline NeuralNetwork network_from_json(const json& j) {
  detail::only_keys(j, {"schema", "layers"}, "network");
  detail::check_schema(j, "network");
  detail::require(j.contains("layers") && j["layers"].is_array() && !j["layers"].empty(),
                  "network: \"layers\" must be a non-empty array");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < j["layers"].size(); ++i) {
    const auto& l = j["layers"][i];
    const std::string where = "network.layers[" + std::to_string(i) + "]";
    detail::only_keys(l, {"W", "b", "kind"}, where);
    detail::require(l.contains("W") && l.contains("b") && l.contains("kind"), where + ": needs W, b and kind");
    detail::require(l["kind"].is_string(), where + ".kind: expected a string");
    const std::string kind = l["kind"];
    detail::require(kind == "relu" || kind == "linear", where + ".kind: expected \"relu\" or \"linear\"");
    layers.push_back(Layer{AffineMap(matrix_from_json(l["W"], where + ".W"), vector_from_json(l["b"], where + ".b")),
                           kind == "relu" ? LayerKind::ReLU : LayerKind::Linear});
  }
  return NeuralNetwork(std::move(layers));
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline NeuralNetwork load_network(const std::filesystem::path& path) {
  try {
    return network_from_json(read_json(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline ShallowNN load_shallow(const std::filesystem::path& path) {
  try {
    return ShallowNN::from_network(load_network(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

/// Network fields may be a path (relative to `base`) or an inline object.
inline NeuralNetwork network_field(const json& j, const std::filesystem::path& base, const std::string& where) {
  if (j.is_string()) return load_network(base / j.get<std::string>());
  if (j.is_object()) return network_from_json(j);
  throw InputError(where + ": expected a file path or an inline network");
}

inline ProblemInstance problem_from_json(const json& j, const std::filesystem::path& base = ".") {
  detail::only_keys(j, {"schema", "dynamics", "barrier", "safe_set", "eps", "x0", "lipschitz"}, "problem");
  detail::check_schema(j, "problem");
  for (const char* k : {"dynamics", "barrier", "safe_set", "eps", "x0"}) {
    detail::require(j.contains(k), std::string("problem: missing \"") + k + "\"");
  }
  ProblemInstance p;
  p.dynamics = network_field(j["dynamics"], base, "problem.dynamics");
  p.barrier = ShallowNN::from_network(network_field(j["barrier"], base, "problem.barrier"));
  p.safe_set = box_from_json(j["safe_set"], "problem.safe_set");
  p.eps = detail::number(j["eps"], "problem.eps");
  p.x0 = vector_from_json(j["x0"], "problem.x0");
  if (j.contains("lipschitz")) {
    const auto& l = j["lipschitz"];
    if (l.is_string()) {
      detail::require(l == "auto", "problem.lipschitz: expected a number or \"auto\"");
    } else {
      p.lipschitz = detail::number(l, "problem.lipschitz");
    }
  }
  p.validate();
  return p;
}

inline ProblemInstance load_problem(const std::filesystem::path& path) {
  try {
    return problem_from_json(read_json(path), path.parent_path());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline json to_json(const PartitionResult& r) {
  json boxes = json::array();
  for (std::size_t i = 0; i < r.audit.size(); ++i) {
    const auto& cb = r.audit[i];
    boxes.push_back({{"lo", to_json(cb.box.lo())},
                     {"hi", to_json(cb.box.hi())},
                     {"barrier_lower", cb.barrier_lower},
                     {"composed_upper", cb.composed_upper},
                     {"ratio", r.per_box_ratios[i]}});
  }
  return {{"boxes", boxes},
          {"gamma", r.gamma},
          {"gamma_valid", r.gamma_valid},
          {"stats",
           {{"boxes_visited", r.stats.boxes_visited},
            {"boxes_split", r.stats.boxes_split},
            {"boxes_dropped", r.stats.boxes_dropped}}}};
}

inline json to_json(const AffineMap& f) { return {{"W", to_json(f.W)}, {"b", to_json(f.b)}}; }

inline json to_json(const FacePiece& f) {
  return {{"cell", f.cell}, {"axis", f.axis}, {"side", f.upper ? "hi" : "lo"}, {"piece", to_json(f.piece)}};
}

/// A point of the region's open cell (inside its first confinement cell)
/// where T_R < 0.
inline std::optional<Vector> component_witness(const SubLevelComponent& c, const Region& r) {
  std::vector<AffineMap> extra;
  if (!c.confinement.empty()) extra = box_interior_constraints(c.confinement.cells[c.cells_of.at(r).front()]);
  extra.push_back(c.local_map(r));
  return interior_point(c.arrangement, r, extra);
}

inline json to_json(const SubLevelComponent& c, bool with_boundary = false, bool with_witness = false) {
  json regions = json::array();
  for (const auto& r : c.sorted_regions()) {
    const auto* rec = c.regions.find(r);
    json item = {{"flips", r.to_string()},
                 {"level", rec->level},
                 {"discovered_by", rec->discovered_by},
                 {"how", to_string(rec->how)},
                 {"affine", to_json(c.local_map(r))}};
    if (with_witness) {
      const auto w = component_witness(c, r);
      item["witness"] = w ? to_json(*w) : json(nullptr);
    }
    regions.push_back(std::move(item));
  }
  json entries = json::array();
  for (const auto& e : c.entries) {
    entries.push_back({{"cell", e.cell}, {"flips", e.flips.to_string()}, {"level", e.level}, {"how", to_string(e.how)}});
  }
  json cells = json::array();
  for (const auto& b : c.confinement.cells) cells.push_back(to_json(b));
  json out = {{"seed_region", c.seed_region.to_string()},
              {"region_count", c.size()},
              {"regions", regions},
              {"entries", entries},
              {"confinement", cells}};
  if (with_boundary) {
    json faces = json::array();
    for (const auto& f : classify_boundary(c)) {
      faces.push_back({{"region", f.region.to_string()},
                       {"face", f.hyperplane == kZeroCrossing ? json("zero_crossing") : json(f.hyperplane)}});
    }
    out["boundary_faces"] = faces;
  }
  return out;
}

inline json to_json(const Certificate& c) {
  json out = {{"schema", kSchema},
              {"verdict", to_string(c.verdict)},
              {"message", c.message},
              {"gamma", c.gamma},
              {"partition", to_json(c.partition)},
              {"lps_solved", c.lps_solved}};
  if (c.x0.size() > 0) out["x0"] = to_json(c.x0);
  if (c.component) out["component"] = to_json(*c.component);
  if (c.containment) {
    json hits = json::array();
    for (const auto& h : c.containment->hits) hits.push_back({{"entry", h.entry}, {"face", to_json(h.face)}});
    out["containment"] = {{"contained", c.containment->contained}, {"lps", c.containment->lps}, {"hits", hits}};
  }
  if (c.component_bbox) {
    json ext = json::array();
    for (const auto& e : c.component_bbox->extents) {
      ext.push_back({{"entry", e.entry}, {"lo", to_json(e.lo)}, {"hi", to_json(e.hi)}});
    }
    out["component_bbox"] = to_json(c.component_bbox->box);
    out["component_bbox_extents"] = ext;
    out["lipschitz"] = c.lipschitz;
    out["lipschitz_source"] = c.lipschitz_auto ? "auto" : "user";
    out["c_ball_radius"] = c.c_ball_radius;
  }
  if (c.c_ball) out["c_ball"] = to_json(*c.c_ball);
  if (c.positivity) {
    json checked = json::array();
    for (const auto& m : c.positivity->checked) checked.push_back({{"region", m.region.to_string()}, {"min", m.minimum}});
    json failing = json::array();
    for (const auto& r : c.positivity->failing) failing.push_back(r.to_string());
    out["positivity"] = {{"passed", c.positivity->passed},
                         {"regions_enumerated", c.positivity->regions_enumerated},
                         {"checked", checked},
                         {"failing", failing}};
  }
  return out;
}

/// Closed cell of `region` inside `box` and {t <= 0}, as a box from 2n LPs;
/// nullopt when that set is empty.
inline std::optional<HyperRectangle> clipped_cell_box(const Arrangement& arr, const Region& region, const AffineMap& t,
                                                      const HyperRectangle& box) {
  const auto n = arr.dim();
  Vector lo(n), hi(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (double dir : {-1.0, 1.0}) {
      Vector obj = Vector::Zero(n);
      obj[k] = dir;
      LinearProgram lp(obj);
      barrier_cert::detail::add_closed_cell(lp, arr, region);
      barrier_cert::detail::add_closed_box(lp, box);
      lp.add_le(t.W.row(0).transpose(), t.b[0]);
      const auto r = solve(lp);
      if (r.status == LpStatus::Infeasible) return std::nullopt;
      if (!r.optimal()) throw NumericalError(std::string("plot-data LP returned ") + to_string(r.status));
      (dir < 0 ? lo : hi)[k] = (*r.x)[k];
    }
  }
  return HyperRectangle(lo, hi);
}

/// Shapes for external plotting: each component entry clipped to its
/// confinement cell (or `view`) and {T_R <= 0}, plus any `others` clipped
/// to `view`. Polygons in 2-D, boxes otherwise.
inline json plot_data(const SubLevelComponent& comp, const HyperRectangle& view, const std::vector<Region>& others = {}) {
  const auto& arr = comp.arrangement;
  const bool planar = arr.dim() == 2;
  const AffineMap always = AffineMap::functional(Vector::Zero(arr.dim()), -1.0);
  auto shape = [&](const Region& r, const AffineMap& t, const HyperRectangle& box) -> json {
    if (planar) {
      json pts = json::array();
      for (const auto& v : region_polygon(arr, r, t, box)) pts.push_back(to_json(v));
      return {{"polygon", pts}};
    }
    const auto b = clipped_cell_box(arr, r, t, box);
    return {{"box", b ? to_json(*b) : json(nullptr)}};
  };
  json shapes = json::array();
  for (const auto& e : comp.entries) {
    const HyperRectangle& box = comp.confinement.empty() ? view : comp.confinement.cells[e.cell];
    json item = shape(e.flips, comp.local_map(e.flips), box);
    item["flips"] = e.flips.to_string();
    item["cell"] = e.cell;
    item["in_component"] = true;
    shapes.push_back(std::move(item));
  }
  for (const auto& r : others) {
    json item = shape(r, always, view);
    item["flips"] = r.to_string();
    item["in_component"] = false;
    shapes.push_back(std::move(item));
  }
  json cells = json::array();
  for (const auto& b : comp.confinement.cells) cells.push_back(to_json(b));
  return {{"schema", kSchema},
          {"kind", planar ? "polygons" : "boxes"},
          {"view", to_json(view)},
          {"confinement", cells},
          {"shapes", shapes}};
}

}  // namespace barrier_cert::io
