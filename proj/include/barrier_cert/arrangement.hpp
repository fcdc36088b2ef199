#pragma once

#include "barrier_cert/box.hpp"
#include "barrier_cert/flip_set.hpp"
#include "barrier_cert/lp.hpp"
#include "barrier_cert/nn.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace barrier_cert {

/// The seed point lies (numerically) on a hyperplane, so it does not pick
/// out a full-dimensional region. Callers perturb the point and retry.
class DegenerateSeed : public InputError {
 public:
  using InputError::InputError;
};

/// Ordered set of scalar affine functionals on R^n. The ordering is the
/// list index.
class Arrangement {
 public:
  Arrangement() = default;
  Arrangement(Matrix normals, Vector offsets) : W_(std::move(normals)), b_(std::move(offsets)) {
    if (W_.rows() != b_.size()) throw InputError("Arrangement: normals/offsets size mismatch");
  }

  explicit Arrangement(const std::vector<AffineMap>& functionals) {
    if (functionals.empty()) throw InputError("Arrangement: no functionals");
    const Eigen::Index n = functionals.front().in_dim();
    W_.resize(static_cast<Eigen::Index>(functionals.size()), n);
    b_.resize(static_cast<Eigen::Index>(functionals.size()));
    for (std::size_t i = 0; i < functionals.size(); ++i) {
      const auto& f = functionals[i];
      if (f.out_dim() != 1 || f.in_dim() != n) {
        throw InputError("Arrangement: functional " + std::to_string(i) + " is not a scalar map on R^" +
                         std::to_string(n));
      }
      W_.row(static_cast<Eigen::Index>(i)) = f.W.row(0);
      b_[static_cast<Eigen::Index>(i)] = f.b[0];
    }
  }

  static Arrangement of(const ShallowNN& net) { return Arrangement(net.hidden().W, net.hidden().b); }

  std::size_t size() const { return static_cast<std::size_t>(W_.rows()); }
  Eigen::Index dim() const { return W_.cols(); }
  const Matrix& normals() const { return W_; }
  const Vector& offsets() const { return b_; }

  AffineMap functional(std::size_t i) const {
    const auto k = static_cast<Eigen::Index>(i);
    return AffineMap::functional(W_.row(k).transpose(), b_[k]);
  }
  double value(std::size_t i, const Vector& x) const {
    const auto k = static_cast<Eigen::Index>(i);
    return W_.row(k).dot(x) + b_[k];
  }

 private:
  Matrix W_;
  Vector b_;
};

/// Regions of an arrangement are identified by their flip sets.
using Region = FlipSet;

/// Sign read-off at a point off every hyperplane.
inline Region find_interior_region(const Arrangement& arr, const Vector& x0) {
  if (x0.size() != arr.dim()) throw InputError("find_interior_region: dimension mismatch");
  Region r(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const double v = arr.value(i, x0);
    if (std::abs(v) <= tol::sign) {
      throw DegenerateSeed("seed point is within " + std::to_string(tol::sign) + " of hyperplane " +
                           std::to_string(i));
    }
    if (v > 0.0) r.set(i);
  }
  return r;
}

enum class Discovery { Seed, Forward, Backward, Stitch };

inline const char* to_string(Discovery d) {
  switch (d) {
    case Discovery::Seed: return "seed";
    case Discovery::Forward: return "forward";
    case Discovery::Backward: return "backward";
    case Discovery::Stitch: return "stitch";
  }
  return "?";
}

struct RegionRecord {
  Region flips;
  std::size_t level = 0;
  long discovered_by = -1;  // hyperplane index, -1 for the seed
  Discovery how = Discovery::Seed;
};

/// Hash table of regions keyed by flip set, insert-if-absent. Records keep
/// insertion order.
class RegionTable {
 public:
  bool contains(const Region& r) const {
    std::lock_guard<std::mutex> lock(mu_);
    return index_.count(r) != 0;
  }

  /// Returns true when the region was not yet present.
  bool insert(RegionRecord rec) {
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, fresh] = index_.emplace(rec.flips, records_.size());
    if (fresh) records_.push_back(std::move(rec));
    return fresh;
  }

  const RegionRecord* find(const Region& r) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = index_.find(r);
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  std::size_t size() const { return records_.size(); }
  const std::vector<RegionRecord>& records() const { return records_; }

  /// Flip sets in canonical (sorted) order.
  std::vector<Region> sorted_regions() const {
    std::vector<Region> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.flips);
    std::sort(out.begin(), out.end());
    return out;
  }

  RegionTable() = default;
  RegionTable(const RegionTable& o) : index_(o.index_), records_(o.records_) {}
  RegionTable& operator=(const RegionTable& o) {
    index_ = o.index_;
    records_ = o.records_;
    return *this;
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<Region, std::size_t, FlipSetHash> index_;
  std::vector<RegionRecord> records_;
};

/// Builder for the slack LPs used by all face tests. Variables are
/// (x, x_s); the objective is max x_s, capped at 1 so unbounded cells give
/// a finite positive cost.
class SlackLp {
 public:
  SlackLp(const Arrangement& arr, const Region& region) : n_(arr.dim()), lp_(unit(arr.dim() + 1, arr.dim())) {
    rows_.reserve(arr.size());
    for (std::size_t j = 0; j < arr.size(); ++j) {
      Vector a(n_ + 1);
      const double s = -region.sign(j);  // flipped rows read -l(x) + x_s <= 0
      a.head(n_) = s * arr.normals().row(static_cast<Eigen::Index>(j)).transpose();
      a[n_] = 1.0;
      rows_.push_back({std::move(a), s * arr.offsets()[static_cast<Eigen::Index>(j)]});
    }
  }

  /// Drop the slack on hyperplane i and pin it: s_i * l_i(x) = 0.
  SlackLp& on_hyperplane(std::size_t i) {
    pinned_ = i;
    return *this;
  }

  /// g(x) + x_s <= 0 (strict interiority of g < 0).
  SlackLp& strictly_negative(const AffineMap& g) {
    Vector a(n_ + 1);
    a.head(n_) = g.W.row(0).transpose();
    a[n_] = 1.0;
    extra_.push_back({std::move(a), g.b[0], Relation::LessEq});
    return *this;
  }

  /// g(x) (rel) 0 without slack.
  SlackLp& plain(const AffineMap& g, Relation rel) {
    Vector a(n_ + 1);
    a.head(n_) = g.W.row(0).transpose();
    a[n_] = 0.0;
    extra_.push_back({std::move(a), g.b[0], rel});
    return *this;
  }

  LinearProgram build() const {
    LinearProgram lp = lp_;
    for (std::size_t j = 0; j < rows_.size(); ++j) {
      Vector a = rows_[j].first;
      if (pinned_ && *pinned_ == j) {
        a[n_] = 0.0;
        lp.add_le(a, rows_[j].second);
        lp.add_ge(std::move(a), rows_[j].second);
      } else {
        lp.add_le(std::move(a), rows_[j].second);
      }
    }
    for (const auto& c : extra_) lp.constraints.push_back(c);
    Vector xs = Vector::Zero(n_ + 1);
    xs[n_] = 1.0;
    lp.add_ge(xs, 0.0);
    lp.add_le(xs, -1.0);
    return lp;
  }

  /// Optimal slack, or nullopt when infeasible.
  std::optional<LpResult> solve() const {
    LpResult r = barrier_cert::solve(build());
    if (r.status == LpStatus::Infeasible) return std::nullopt;
    if (r.status != LpStatus::Optimal) {
      throw NumericalError(std::string("slack LP returned ") + to_string(r.status) +
                           (pinned_ ? " while testing hyperplane " + std::to_string(*pinned_) : std::string()));
    }
    return r;
  }

  /// True when the LP has a solution with cost above tol::face.
  bool positive() const {
    auto r = solve();
    return r && *r->cost > tol::face;
  }

 private:
  static Vector unit(Eigen::Index size, Eigen::Index k) {
    Vector v = Vector::Zero(size);
    v[k] = 1.0;
    return v;
  }

  Eigen::Index n_;
  LinearProgram lp_;
  std::vector<std::pair<Vector, double>> rows_;
  std::vector<LinearConstraint> extra_;
  std::optional<std::size_t> pinned_;
};

/// Cell of `region` is nonempty as an open set (slack LP positive).
inline bool region_is_full_dimensional(const Arrangement& arr, const Region& region,
                                       const std::vector<AffineMap>& add_constr = {}) {
  SlackLp lp(arr, region);
  for (const auto& g : add_constr) lp.strictly_negative(g);
  return lp.positive();
}

/// A point deep inside the cell (the slack-LP maximizer), if the cell is
/// full-dimensional.
inline std::optional<Vector> interior_point(const Arrangement& arr, const Region& region,
                                            const std::vector<AffineMap>& add_constr = {}) {
  SlackLp lp(arr, region);
  for (const auto& g : add_constr) lp.strictly_negative(g);
  auto r = lp.solve();
  if (!r || *r->cost <= tol::face) return std::nullopt;
  return Vector(r->x->head(arr.dim()));
}

/// Negates every functional flipped in `region`, making it the base region.
/// Hyperplanes (zero sets) are unchanged.
inline Arrangement rebase(const Arrangement& arr, const Region& region) {
  if (region.size() != arr.size()) throw InputError("rebase: region/arrangement size mismatch");
  if (!region_is_full_dimensional(arr, region)) throw InputError("rebase: region is not a full-dimensional cell");
  Matrix W = arr.normals();
  Vector b = arr.offsets();
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (region.test(i)) {
      W.row(static_cast<Eigen::Index>(i)) *= -1.0;
      b[static_cast<Eigen::Index>(i)] *= -1.0;
    }
  }
  return {std::move(W), std::move(b)};
}

/// Face test for hyperplane i of `region`: max x_s s.t. all other
/// hyperplanes strict (via slack), hyperplane i pinned, plus
/// g(x) + x_s <= 0 for each g in add_constr.
inline bool has_full_dimensional_face(const Arrangement& arr, const Region& region, std::size_t i,
                                      const std::vector<AffineMap>& add_constr = {}) {
  SlackLp lp(arr, region);
  lp.on_hyperplane(i);
  for (const auto& g : add_constr) lp.strictly_negative(g);
  return lp.positive();
}

/// For each i in test_hypers whose face is full-dimensional (subject to
/// add_constr), the region with i flipped is inserted into `table` if new
/// and returned. When `skip_known` is set, hyperplanes whose flip leads to
/// a region already in the table are not LP-tested (the result would be
/// discarded anyway).
inline std::vector<Region> find_successors(const Arrangement& arr, const Region& region,
                                           const std::vector<std::size_t>& test_hypers,
                                           const std::vector<AffineMap>& add_constr, RegionTable& table,
                                           std::size_t level = 0, Discovery how = Discovery::Forward,
                                           bool skip_known = true) {
  std::vector<Region> out;
  for (auto i : test_hypers) {
    Region next = region.flipped(i);
    if (skip_known && table.contains(next)) continue;
    if (!has_full_dimensional_face(arr, region, i, add_constr)) continue;
    if (table.insert({next, level, static_cast<long>(i), how})) out.push_back(std::move(next));
  }
  return out;
}

/// find_successors with the default test set: the unflipped hyperplanes.
inline std::vector<Region> find_successors(const Arrangement& arr, const Region& region, RegionTable& table,
                                           const std::vector<AffineMap>& add_constr = {}) {
  return find_successors(arr, region, region.unflipped_indices(), add_constr, table);
}

struct EnumerationOptions {
  unsigned threads = 1;
  bool skip_known = true;
};

/// Hyperplanes unflipped relative to `base` (the flip direction that moves
/// up one level).
inline std::vector<std::size_t> upward_hyperplanes(const Region& region, const Region& base) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (region.test(i) == base.test(i)) out.push_back(i);
  }
  return out;
}

inline std::vector<std::size_t> downward_hyperplanes(const Region& region, const Region& base) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (region.test(i) != base.test(i)) out.push_back(i);
  }
  return out;
}

namespace detail {

/// Runs `work(k)` for k in [0, count) on up to `threads` workers; results
/// are returned in index order.
template <class R, class F>
std::vector<R> parallel_map(std::size_t count, unsigned threads, F work) {
  std::vector<R> out(count);
  if (threads <= 1 || count <= 1) {
    for (std::size_t k = 0; k < count; ++k) out[k] = work(k);
    return out;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t workers = std::min<std::size_t>(threads, count);
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t k = w; k < count; k += workers) out[k] = work(k);
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

}  // namespace detail

/// Level-wise enumeration of every full-dimensional region reachable from
/// `seed` by flipping one hyperplane at a time, moving up one level per
/// step relative to `seed` as base region. Flip sets in the result are in
/// the coordinates of `arr`; RegionRecord::level is the distance from the
/// seed. add_constr entries act as hyperplanes that are never flipped
/// (confinement).
inline RegionTable enumerate_regions(const Arrangement& arr, const Region& seed,
                                     const std::vector<AffineMap>& add_constr = {},
                                     const EnumerationOptions& opts = {}) {
  if (seed.size() != arr.size()) throw InputError("enumerate_regions: seed/arrangement size mismatch");
  RegionTable table;
  table.insert({seed, 0, -1, Discovery::Seed});
  std::vector<Region> level{seed};
  for (std::size_t depth = 1; !level.empty(); ++depth) {
    std::vector<Region> next;
    if (opts.threads <= 1) {
      for (const auto& r : level) {
        auto succ = find_successors(arr, r, upward_hyperplanes(r, seed), add_constr, table, depth,
                                    Discovery::Forward, opts.skip_known);
        next.insert(next.end(), succ.begin(), succ.end());
      }
    } else {
      // Face LPs in parallel, table inserts in level order.
      auto faces = detail::parallel_map<std::vector<std::size_t>>(level.size(), opts.threads, [&](std::size_t k) {
        std::vector<std::size_t> hit;
        for (auto i : upward_hyperplanes(level[k], seed)) {
          if (opts.skip_known && table.contains(level[k].flipped(i))) continue;
          if (has_full_dimensional_face(arr, level[k], i, add_constr)) hit.push_back(i);
        }
        return hit;
      });
      for (std::size_t k = 0; k < level.size(); ++k) {
        for (auto i : faces[k]) {
          Region r = level[k].flipped(i);
          if (table.insert({r, depth, static_cast<long>(i), Discovery::Forward})) next.push_back(std::move(r));
        }
      }
    }
    std::sort(next.begin(), next.end());
    level = std::move(next);
  }
  return table;
}

}  // namespace barrier_cert
