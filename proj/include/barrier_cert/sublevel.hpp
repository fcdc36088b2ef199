#pragma once

#include "barrier_cert/arrangement.hpp"
#include "barrier_cert/box.hpp"
#include "barrier_cert/lp.hpp"
#include "barrier_cert/nn.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace barrier_cert {

/// The barrier is not strictly negative at the seed point.
class SeedNotNegative : public InputError {
 public:
  using InputError::InputError;
};

/// The seed point lies in none of the confinement boxes.
class SeedOutsideConfinement : public InputError {
 public:
  using InputError::InputError;
};

/// coef * x_k + offset on R^n.
inline AffineMap coordinate_functional(Eigen::Index n, Eigen::Index k, double coef, double offset) {
  Vector w = Vector::Zero(n);
  w[k] = coef;
  return AffineMap::functional(w, offset);
}

/// lo_k - x_k < 0 and x_k - hi_k < 0 for every axis except `skip`.
inline std::vector<AffineMap> box_interior_constraints(const HyperRectangle& box, Eigen::Index skip = -1) {
  const auto n = static_cast<Eigen::Index>(box.dim());
  std::vector<AffineMap> out;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k == skip) continue;
    out.push_back(coordinate_functional(n, k, -1.0, box.lo()[k]));
    out.push_back(coordinate_functional(n, k, 1.0, -box.hi()[k]));
  }
  return out;
}

/// Face test for hyperplane i of `region` that additionally asks the face
/// to meet {T < 0}: the face leads into another region of the same
/// component of int(Z<=).
inline bool zsub_adjacent(const Arrangement& arr, const Region& region, std::size_t i, const AffineMap& t,
                          const std::vector<AffineMap>& add_constr = {}) {
  std::vector<AffineMap> c = add_constr;
  c.push_back(t);
  return has_full_dimensional_face(arr, region, i, c);
}

/// The open cell of `region` (within add_constr) meets {T < 0}.
inline bool meets_open_sublevel(const Arrangement& arr, const Region& region, const AffineMap& t,
                                const std::vector<AffineMap>& add_constr = {}) {
  std::vector<AffineMap> c = add_constr;
  c.push_back(t);
  return region_is_full_dimensional(arr, region, c);
}

/// An axis-aligned piece of a confinement box face: `piece` is degenerate
/// in `axis`, where lo = hi = value.
struct FacePiece {
  std::size_t cell = 0;
  Eigen::Index axis = 0;
  bool upper = false;  // face x_axis = hi of the cell
  HyperRectangle piece;

  double value() const { return piece.lo()[axis]; }
};

/// Part of a face of cell `from` that is also a face of cell `to`.
struct SharedFace {
  std::size_t from = 0;
  std::size_t to = 0;
  FacePiece face;
};

namespace detail {

/// Pieces of a \ b, both boxes degenerate in the same axis `fixed`.
inline std::vector<HyperRectangle> subtract_box(const HyperRectangle& a, const HyperRectangle& b, Eigen::Index fixed) {
  const auto n = static_cast<Eigen::Index>(a.dim());
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == fixed) continue;
    if (!(b.lo()[j] < a.hi()[j] && a.lo()[j] < b.hi()[j])) return {a};
  }
  std::vector<HyperRectangle> out;
  Vector lo = a.lo(), hi = a.hi();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == fixed) continue;
    if (b.lo()[j] > lo[j]) {
      Vector h = hi;
      h[j] = b.lo()[j];
      out.emplace_back(lo, h);
      lo[j] = b.lo()[j];
    }
    if (b.hi()[j] < hi[j]) {
      Vector l = lo;
      l[j] = b.hi()[j];
      out.emplace_back(l, hi);
      hi[j] = b.hi()[j];
    }
  }
  return out;
}

}  // namespace detail

/// A union of interior-disjoint boxes, with the faces they share and the
/// face pieces that bound the union.
struct Confinement {
  std::vector<HyperRectangle> cells;
  std::vector<SharedFace> shared;
  std::vector<FacePiece> boundary;

  bool empty() const { return cells.empty(); }
};

/// Shared faces are found by exact coordinate equality, which holds for
/// boxes produced by midpoint splitting.
inline Confinement make_confinement(std::vector<HyperRectangle> cells) {
  Confinement conf;
  conf.cells = std::move(cells);
  const std::size_t m = conf.cells.size();
  for (std::size_t c = 0; c < m; ++c) {
    if (conf.cells[c].dim() != conf.cells.front().dim()) throw InputError("confinement boxes differ in dimension");
    if (!(conf.cells[c].widths().array() > 0.0).all()) {
      throw InputError("confinement box " + std::to_string(c) + " has zero width");
    }
    for (std::size_t d = c + 1; d < m; ++d) {
      if (conf.cells[c].interiors_overlap(conf.cells[d])) {
        throw InputError("confinement boxes " + std::to_string(c) + " and " + std::to_string(d) + " overlap");
      }
    }
  }
  for (std::size_t c = 0; c < m; ++c) {
    const auto& box = conf.cells[c];
    const auto n = static_cast<Eigen::Index>(box.dim());
    for (Eigen::Index k = 0; k < n; ++k) {
      for (bool upper : {false, true}) {
        const double v = upper ? box.hi()[k] : box.lo()[k];
        Vector flo = box.lo(), fhi = box.hi();
        flo[k] = fhi[k] = v;
        std::vector<HyperRectangle> open{HyperRectangle(flo, fhi)};
        for (std::size_t d = 0; d < m; ++d) {
          if (d == c) continue;
          const auto& other = conf.cells[d];
          if ((upper ? other.lo()[k] : other.hi()[k]) != v) continue;
          Vector plo = flo.cwiseMax(other.lo()), phi = fhi.cwiseMin(other.hi());
          plo[k] = phi[k] = v;
          bool overlap = true;
          for (Eigen::Index j = 0; j < n; ++j) {
            if (j != k && !(plo[j] < phi[j])) overlap = false;
          }
          if (!overlap) continue;
          const HyperRectangle piece(plo, phi);
          conf.shared.push_back({c, d, {c, k, upper, piece}});
          std::vector<HyperRectangle> rest;
          for (const auto& o : open) {
            for (auto& r : detail::subtract_box(o, piece, k)) rest.push_back(std::move(r));
          }
          open = std::move(rest);
        }
        for (auto& o : open) conf.boundary.push_back({c, k, upper, std::move(o)});
      }
    }
  }
  return conf;
}

/// Slack LP asking whether the relative interior of `face` meets the open
/// cell of `region` and {T < 0}.
inline bool face_piece_meets(const Arrangement& arr, const Region& region, const AffineMap& t, const FacePiece& face) {
  const auto n = arr.dim();
  SlackLp lp(arr, region);
  lp.plain(coordinate_functional(n, face.axis, 1.0, -face.value()), Relation::Equal);
  for (const auto& g : box_interior_constraints(face.piece, face.axis)) lp.strictly_negative(g);
  lp.strictly_negative(t);
  return lp.positive();
}

/// One discovered (confinement cell, region) pair.
struct ComponentEntry {
  std::size_t cell = 0;
  Region flips;
  std::size_t level = 0;
  long discovered_by = -1;  // hyperplane index; -1 for seeds and stitches
  Discovery how = Discovery::Seed;
};

struct SubLevelOptions {
  unsigned threads = 1;
  bool skip_known = true;  // skip LPs whose outcome would only rediscover a known entry
  bool backward = true;    // disable to get forward-only traversal
};

/// Regions meeting the connected component of int(Z<=(net)) that contains
/// the seed point, optionally confined to a union of boxes.
struct SubLevelComponent {
  Arrangement arrangement;
  Region seed_region;
  Confinement confinement;
  std::vector<ComponentEntry> entries;
  RegionTable regions;  // distinct flip sets, first discovery wins
  std::unordered_map<Region, AffineMap, FlipSetHash> affine;
  std::unordered_map<Region, std::vector<std::size_t>, FlipSetHash> cells_of;

  std::size_t size() const { return regions.size(); }
  bool contains(const Region& r) const { return regions.contains(r); }
  std::vector<Region> sorted_regions() const { return regions.sorted_regions(); }

  const AffineMap& local_map(const Region& r) const {
    auto it = affine.find(r);
    if (it == affine.end()) throw InputError("region " + r.to_string() + " is not in the component");
    return it->second;
  }

  /// nBF(x) <= tol and x's activation pattern is a component region in a
  /// confinement cell holding x.
  bool contains_point(const ShallowNN& net, const Vector& x, double tol = 1e-7) const {
    if (net(x) > tol) return false;
    const Region r = activation_pattern(net, x);
    if (!contains(r)) return false;
    if (confinement.empty()) return true;
    for (auto c : cells_of.at(r)) {
      if (confinement.cells[c].contains(x, tol)) return true;
    }
    return false;
  }
};

namespace detail {

struct EntryKey {
  std::size_t cell;
  Region flips;
  bool operator==(const EntryKey& o) const { return cell == o.cell && flips == o.flips; }
};

struct EntryKeyHash {
  std::size_t operator()(const EntryKey& k) const noexcept {
    return FlipSetHash{}(k.flips) ^ (std::hash<std::size_t>{}(k.cell) * 0x9e3779b97f4a7c15ULL);
  }
};

inline bool entry_less(const ComponentEntry& a, const ComponentEntry& b) {
  if (a.cell != b.cell) return a.cell < b.cell;
  return a.flips < b.flips;
}

}  // namespace detail

/// Level-wise traversal of the component through faces that meet {T_R < 0}.
/// Each entry runs a forward pass over hyperplanes not flipped relative
/// to the seed region, then (if its cell meets {T_R < 0}) a backward pass
/// over the flipped ones, then crosses shared faces into neighbouring
/// confinement cells.
inline SubLevelComponent enumerate_sublevel_component(const ShallowNN& net, const Vector& x0,
                                                      const std::vector<HyperRectangle>& cells = {},
                                                      const SubLevelOptions& opts = {}) {
  if (x0.size() != net.in_dim()) throw InputError("enumerate_sublevel_component: seed dimension mismatch");
  const double v0 = net(x0);
  if (!(v0 < -tol::face)) {
    throw SeedNotNegative("barrier value at seed is " + format_number(v0) + ", must be < -" + format_number(tol::face));
  }
  SubLevelComponent comp;
  comp.arrangement = Arrangement::of(net);
  const Arrangement& arr = comp.arrangement;
  comp.seed_region = find_interior_region(arr, x0);
  comp.confinement = make_confinement(cells);
  const Region& seed = comp.seed_region;
  const bool confined = !comp.confinement.empty();
  if (confined && static_cast<Eigen::Index>(comp.confinement.cells.front().dim()) != arr.dim()) {
    throw InputError("confinement boxes do not match the barrier's input dimension");
  }

  std::vector<std::vector<AffineMap>> cell_constr(confined ? comp.confinement.cells.size() : 1);
  if (confined) {
    for (std::size_t c = 0; c < cell_constr.size(); ++c) cell_constr[c] = box_interior_constraints(comp.confinement.cells[c]);
  }
  std::vector<std::vector<std::size_t>> shared_from(cell_constr.size());
  for (std::size_t s = 0; s < comp.confinement.shared.size(); ++s) shared_from[comp.confinement.shared[s].from].push_back(s);

  std::unordered_map<detail::EntryKey, std::size_t, detail::EntryKeyHash> index;
  auto known = [&](std::size_t cell, const Region& r) { return index.count({cell, r}) != 0; };
  auto insert = [&](ComponentEntry e) {
    if (!index.emplace(detail::EntryKey{e.cell, e.flips}, comp.entries.size()).second) return false;
    comp.entries.push_back(std::move(e));
    return true;
  };

  const AffineMap t_seed = local_affine(net, seed);
  std::vector<ComponentEntry> level;
  for (std::size_t c = 0; c < cell_constr.size(); ++c) {
    if (confined && !comp.confinement.cells[c].contains(x0)) continue;
    if (!meets_open_sublevel(arr, seed, t_seed, cell_constr[c])) continue;
    ComponentEntry e{c, seed, 0, -1, Discovery::Seed};
    if (insert(e)) level.push_back(std::move(e));
  }
  if (level.empty()) {
    if (confined) throw SeedOutsideConfinement("seed point is not inside any confinement box");
    throw NumericalError("seed region does not meet the open sub-level set");
  }

  for (std::size_t depth = 1; !level.empty(); ++depth) {
    auto found = detail::parallel_map<std::vector<ComponentEntry>>(level.size(), opts.threads, [&](std::size_t k) {
      const ComponentEntry& e = level[k];
      const AffineMap t = local_affine(net, e.flips);
      std::vector<AffineMap> extra = cell_constr[e.cell];
      extra.push_back(t);
      std::vector<ComponentEntry> hits;
      auto scan = [&](const std::vector<std::size_t>& hypers, Discovery how) {
        for (auto i : hypers) {
          Region next = e.flips.flipped(i);
          if (opts.skip_known && known(e.cell, next)) continue;
          if (has_full_dimensional_face(arr, e.flips, i, extra)) {
            hits.push_back({e.cell, std::move(next), depth, static_cast<long>(i), how});
          }
        }
      };
      scan(upward_hyperplanes(e.flips, seed), Discovery::Forward);
      if (opts.backward && region_is_full_dimensional(arr, e.flips, extra)) {
        scan(downward_hyperplanes(e.flips, seed), Discovery::Backward);
      }
      for (auto s : shared_from[e.cell]) {
        const SharedFace& sf = comp.confinement.shared[s];
        if (opts.skip_known && known(sf.to, e.flips)) continue;
        if (face_piece_meets(arr, e.flips, t, sf.face)) hits.push_back({sf.to, e.flips, depth, -1, Discovery::Stitch});
      }
      return hits;
    });
    std::vector<ComponentEntry> next;
    for (auto& hits : found) {
      for (auto& h : hits) {
        if (insert(h)) next.push_back(std::move(h));
      }
    }
    std::sort(next.begin(), next.end(), detail::entry_less);
    level = std::move(next);
  }

  for (const auto& e : comp.entries) {
    comp.cells_of[e.flips].push_back(e.cell);
    if (comp.regions.insert({e.flips, e.level, e.discovered_by, e.how})) {
      comp.affine.emplace(e.flips, local_affine(net, e.flips));
    }
  }
  return comp;
}

/// A confinement face piece the component reaches.
struct ContainmentHit {
  std::size_t entry = 0;  // index into SubLevelComponent::entries
  FacePiece face;
};

struct ContainmentReport {
  bool contained = false;
  std::vector<ContainmentHit> hits;
  std::size_t lps = 0;
};

/// The component stays inside the union of its confinement boxes iff no
/// entry's cell meets {T_R < 0} on a face piece that bounds the union.
inline ContainmentReport check_containment(const SubLevelComponent& comp) {
  if (comp.confinement.empty()) throw InputError("check_containment: component was enumerated without confinement");
  ContainmentReport rep;
  for (std::size_t k = 0; k < comp.entries.size(); ++k) {
    const auto& e = comp.entries[k];
    const AffineMap& t = comp.local_map(e.flips);
    for (const auto& face : comp.confinement.boundary) {
      if (face.cell != e.cell) continue;
      ++rep.lps;
      if (face_piece_meets(comp.arrangement, e.flips, t, face)) rep.hits.push_back({k, face});
    }
  }
  rep.contained = rep.hits.empty();
  return rep;
}

/// Flipped hyperplanes (relative to `base`) of `region` whose face is a
/// fold-back face: the face meets {T < 0}, and its closure meets {T = 0}.
/// Test-only; the production backward pass uses the coarser cell gate.
inline std::vector<std::size_t> detect_fold_back_faces(const Arrangement& arr, const Region& region, const AffineMap& t,
                                                       std::optional<Region> base = std::nullopt) {
  const Region b = base ? *base : Region(arr.size());
  const auto n = arr.dim();
  std::vector<std::size_t> out;
  for (auto i : downward_hyperplanes(region, b)) {
    if (!zsub_adjacent(arr, region, i, t)) continue;
    LinearProgram closure(Vector::Zero(n));
    for (std::size_t j = 0; j < arr.size(); ++j) {
      const double s = region.test(j) ? -1.0 : 1.0;
      const Vector a = s * arr.normals().row(static_cast<Eigen::Index>(j)).transpose();
      const double c = s * arr.offsets()[static_cast<Eigen::Index>(j)];
      if (j == i) {
        closure.add_eq(a, c);
      } else {
        closure.add_le(a, c);
      }
    }
    closure.add_eq(t.W.row(0).transpose(), t.b[0]);
    const auto r = solve(closure);
    if (r.status == LpStatus::NumericalFailure) {
      throw NumericalError("fold-back closure LP failed on hyperplane " + std::to_string(i));
    }
    if (r.optimal()) out.push_back(i);
  }
  return out;
}

/// Marker used in BoundaryFace::hyperplane for the zero crossing of T_R.
inline constexpr long kZeroCrossing = -1;

struct BoundaryFace {
  Region region;
  long hyperplane = kZeroCrossing;
};

/// Where each component region's contribution ends: full-dimensional
/// faces leading to regions outside the component, and cells crossed by
/// {T_R = 0}.
inline std::vector<BoundaryFace> classify_boundary(const SubLevelComponent& comp) {
  std::vector<BoundaryFace> out;
  const auto& arr = comp.arrangement;
  for (const auto& r : comp.sorted_regions()) {
    const AffineMap& t = comp.local_map(r);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (comp.contains(r.flipped(i))) continue;
      if (has_full_dimensional_face(arr, r, i)) out.push_back({r, static_cast<long>(i)});
    }
    if (!t.W.isZero()) {
      SlackLp lp(arr, r);
      lp.plain(t, Relation::Equal);
      if (lp.positive()) out.push_back({r, kZeroCrossing});
    }
  }
  return out;
}

}  // namespace barrier_cert
