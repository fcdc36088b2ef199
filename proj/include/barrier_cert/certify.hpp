#pragma once

#include "barrier_cert/arrangement.hpp"
#include "barrier_cert/box.hpp"
#include "barrier_cert/lp.hpp"
#include "barrier_cert/nn.hpp"
#include "barrier_cert/partition.hpp"
#include "barrier_cert/sublevel.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace barrier_cert {

/// The component's cells are not bounded, so no bounding box exists.
class UnboundedComponent : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct ProblemInstance {
  NeuralNetwork dynamics;
  ShallowNN barrier;
  HyperRectangle safe_set;
  double eps = 0.01;
  Vector x0;
  std::optional<double> lipschitz;  // nullopt: computed from the weights

  void validate() const {
    const auto n = barrier.in_dim();
    if (dynamics.in_dim() != n || dynamics.out_dim() != n) {
      throw InputError("dynamics must map R^" + std::to_string(n) + " to itself");
    }
    if (static_cast<Eigen::Index>(safe_set.dim()) != n) throw InputError("safe set dimension mismatch");
    if (x0.size() != n) throw InputError("x0 dimension mismatch");
    if (!safe_set.contains(x0)) throw InputError("x0 is not in the safe set");
    if (!(eps > 0.0)) throw InputError("eps must be positive");
    if (lipschitz && !(*lipschitz >= 0.0)) throw InputError("Lipschitz estimate must be non-negative");
  }
};

enum class Verdict { Certified, FailedSubproblem1, FailedContainment, FailedPositivity, GammaNotStrict };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Certified: return "Certified";
    case Verdict::FailedSubproblem1: return "FailedSubproblem1";
    case Verdict::FailedContainment: return "FailedContainment";
    case Verdict::FailedPositivity: return "FailedPositivity";
    case Verdict::GammaNotStrict: return "GammaNotStrict";
  }
  return "?";
}

/// Coordinate-wise extremes of one component entry.
struct EntryExtent {
  std::size_t entry = 0;
  Vector lo, hi;
};

struct BoundingBoxResult {
  HyperRectangle box;
  std::vector<EntryExtent> extents;
};

namespace detail {

/// Closed cell of `region`, as non-strict rows in x.
inline void add_closed_cell(LinearProgram& lp, const Arrangement& arr, const Region& region) {
  for (std::size_t j = 0; j < arr.size(); ++j) {
    const double s = region.test(j) ? -1.0 : 1.0;
    lp.add_le(s * arr.normals().row(static_cast<Eigen::Index>(j)).transpose(), s * arr.offsets()[static_cast<Eigen::Index>(j)]);
  }
}

inline void add_closed_box(LinearProgram& lp, const HyperRectangle& box) {
  const auto n = static_cast<Eigen::Index>(box.dim());
  for (Eigen::Index k = 0; k < n; ++k) {
    Vector e = Vector::Zero(n);
    e[k] = 1.0;
    lp.add_le(e, -box.hi()[k]);
    lp.add_ge(e, -box.lo()[k]);
  }
}

}  // namespace detail

/// Two LPs per coordinate and entry over closed cell, closed confinement
/// box and {T_R <= 0}; the result contains the closure of the component.
inline BoundingBoxResult component_bounding_box(const SubLevelComponent& comp) {
  if (comp.entries.empty()) throw InputError("component_bounding_box: empty component");
  const auto& arr = comp.arrangement;
  const auto n = arr.dim();
  BoundingBoxResult res;
  Vector lo = Vector::Constant(n, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (std::size_t k = 0; k < comp.entries.size(); ++k) {
    const auto& e = comp.entries[k];
    const AffineMap& t = comp.local_map(e.flips);
    EntryExtent ext{k, Vector(n), Vector(n)};
    for (Eigen::Index axis = 0; axis < n; ++axis) {
      for (double dir : {-1.0, 1.0}) {
        Vector obj = Vector::Zero(n);
        obj[axis] = dir;
        LinearProgram lp(obj);
        detail::add_closed_cell(lp, arr, e.flips);
        if (!comp.confinement.empty()) detail::add_closed_box(lp, comp.confinement.cells[e.cell]);
        lp.add_le(t.W.row(0).transpose(), t.b[0]);
        const auto r = solve(lp);
        if (r.status == LpStatus::Unbounded) {
          throw UnboundedComponent("component region " + e.flips.to_string() + " is unbounded along axis " +
                                   std::to_string(axis));
        }
        if (!r.optimal()) {
          throw NumericalError(std::string("bounding-box LP returned ") + to_string(r.status) + " for region " +
                               e.flips.to_string());
        }
        if (dir < 0) {
          ext.lo[axis] = (*r.x)[axis];
        } else {
          ext.hi[axis] = (*r.x)[axis];
        }
      }
    }
    lo = lo.cwiseMin(ext.lo);
    hi = hi.cwiseMax(ext.hi);
    res.extents.push_back(std::move(ext));
  }
  res.box = HyperRectangle(lo, hi);
  return res;
}

/// Product over layers of the max-absolute-row-sum norm of W: an upper
/// bound on the max-norm Lipschitz constant of a ReLU network.
inline double lipschitz_estimate(const NeuralNetwork& net) {
  double l = 1.0;
  for (const auto& layer : net.layers()) l *= layer.map.W.cwiseAbs().rowwise().sum().maxCoeff();
  return l;
}

/// (L + 1) * sup_{x in bbox} |x - x0|_inf + sup_{x in bbox} |f(x0) - x|_inf.
inline double c_ball_radius(const HyperRectangle& bbox, const Vector& x0, const Vector& f_x0, double lipschitz) {
  auto sup_dist = [&](const Vector& p) {
    return (bbox.lo() - p).cwiseAbs().cwiseMax((bbox.hi() - p).cwiseAbs()).maxCoeff();
  };
  return (lipschitz + 1.0) * sup_dist(x0) + sup_dist(f_x0);
}

struct RegionMinimum {
  Region region;
  double minimum = 0.0;
};

struct PositivityReport {
  bool passed = false;
  std::size_t regions_enumerated = 0;
  std::vector<RegionMinimum> checked;  // regions outside the component
  std::vector<Region> failing;
};

/// Enumerates every region meeting the open ball (its faces held fixed),
/// and requires min T_R > tol::face over closed cell and ball for every
/// region outside the component.
inline PositivityReport check_positivity_outside(const ShallowNN& net, const SubLevelComponent& comp,
                                                 const HyperRectangle& ball, const Vector& x0,
                                                 const EnumerationOptions& opts = {}) {
  const Arrangement& arr = comp.arrangement;
  const auto faces = box_interior_constraints(ball);
  const Region seed = find_interior_region(arr, x0);
  const RegionTable table = enumerate_regions(arr, seed, faces, opts);
  PositivityReport rep;
  rep.regions_enumerated = table.size();
  for (const auto& r : table.sorted_regions()) {
    if (comp.contains(r)) continue;
    const AffineMap t = local_affine(net, r);
    LinearProgram lp(-t.W.row(0).transpose());
    detail::add_closed_cell(lp, arr, r);
    detail::add_closed_box(lp, ball);
    const auto res = solve(lp);
    if (!res.optimal()) {
      throw NumericalError(std::string("positivity LP returned ") + to_string(res.status) + " for region " +
                           r.to_string());
    }
    const double m = -*res.cost + t.b[0];
    rep.checked.push_back({r, m});
    if (!(m > tol::face)) rep.failing.push_back(r);
  }
  rep.passed = rep.failing.empty();
  return rep;
}

struct CertifyOptions {
  unsigned threads = 1;
  std::uint64_t seed = 0;  // perturbation directions for a degenerate x0
};

struct Certificate {
  Verdict verdict = Verdict::FailedSubproblem1;
  std::string message;
  double gamma = 0.0;
  PartitionResult partition;
  Vector x0;  // seed actually used (perturbed when the given one was degenerate)
  std::optional<SubLevelComponent> component;
  std::optional<ContainmentReport> containment;
  std::optional<BoundingBoxResult> component_bbox;
  double lipschitz = 0.0;
  bool lipschitz_auto = false;
  double c_ball_radius = 0.0;
  std::optional<HyperRectangle> c_ball;
  std::optional<PositivityReport> positivity;
  std::uint64_t lps_solved = 0;
};

/// x0 moved off every activation hyperplane by the smallest of a fixed
/// sequence of pseudo-random offsets that keeps it negative and inside
/// the safe set.
inline Vector nondegenerate_seed(const ShallowNN& net, const Vector& x0, const HyperRectangle& safe_set,
                                 std::uint64_t seed) {
  const Arrangement arr = Arrangement::of(net);
  try {
    find_interior_region(arr, x0);
    return x0;
  } catch (const DegenerateSeed&) {
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const double scale = 1e-6 * (1.0 + x0.cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 64; ++attempt) {
    Vector d(x0.size());
    for (Eigen::Index k = 0; k < d.size(); ++k) d[k] = g(rng);
    const Vector x = x0 + scale * d / d.cwiseAbs().maxCoeff();
    if (!safe_set.contains(x) || !(net(x) < -tol::face)) continue;
    try {
      find_interior_region(arr, x);
      return x;
    } catch (const DegenerateSeed&) {
    }
  }
  throw DegenerateSeed("could not move x0 off the activation hyperplanes");
}

inline Certificate certify(const ProblemInstance& p, const CertifyOptions& opts = {}) {
  p.validate();
  const auto lps_before = lp_solve_count().load();
  Certificate cert;
  auto finish = [&](Verdict v, std::string msg) {
    cert.verdict = v;
    cert.message = std::move(msg);
    cert.lps_solved = lp_solve_count().load() - lps_before;
    return cert;
  };

  const double v0 = p.barrier(p.x0);
  if (!(v0 < -tol::face)) {
    throw SeedNotNegative("barrier value at x0 is " + format_number(v0) + ", must be < -" + format_number(tol::face));
  }

  cert.partition = partition_safe_set(p.safe_set, p.barrier, p.dynamics, {p.eps, opts.threads});
  cert.gamma = cert.partition.gamma;
  if (cert.partition.boxes.empty()) return finish(Verdict::FailedSubproblem1, "no box of the safe set passed the decrease test");
  if (!cert.partition.gamma_valid) return finish(Verdict::GammaNotStrict, "gamma = 0: some box has u_f = 0 or l_BF = 0");

  cert.x0 = nondegenerate_seed(p.barrier, p.x0, p.safe_set, opts.seed);
  try {
    cert.component = enumerate_sublevel_component(p.barrier, cert.x0, cert.partition.boxes, {opts.threads, true, true});
  } catch (const SeedOutsideConfinement&) {
    return finish(Verdict::FailedContainment, "x0 is not inside the certified decrease set");
  }
  cert.containment = check_containment(*cert.component);
  if (!cert.containment->contained) {
    return finish(Verdict::FailedContainment, "the sub-level component reaches the boundary of the decrease set");
  }

  cert.component_bbox = component_bounding_box(*cert.component);
  cert.lipschitz_auto = !p.lipschitz.has_value();
  cert.lipschitz = p.lipschitz ? *p.lipschitz : lipschitz_estimate(p.dynamics);
  cert.c_ball_radius = c_ball_radius(cert.component_bbox->box, cert.x0, evaluate(p.dynamics, cert.x0), cert.lipschitz);
  cert.c_ball = HyperRectangle::cube(cert.x0, cert.c_ball_radius);
  cert.positivity = check_positivity_outside(p.barrier, *cert.component, *cert.c_ball, cert.x0, {opts.threads, true});
  if (!cert.positivity->passed) {
    return finish(Verdict::FailedPositivity, "the barrier is not positive on the reach ball outside the component");
  }
  return finish(Verdict::Certified, "all checks passed");
}

/// Vertices of the closed cell of `region` within `box` and {T_R <= 0},
/// in counter-clockwise order (2-D only). Empty when the set is empty.
inline std::vector<Vector> region_polygon(const Arrangement& arr, const Region& region, const AffineMap& t,
                                          const HyperRectangle& box) {
  if (arr.dim() != 2) throw InputError("region_polygon: only 2-D arrangements");
  std::vector<Vector> poly;
  for (std::size_t k : {0u, 1u, 3u, 2u}) poly.push_back(box.corner(k));
  auto clip = [&](const Vector& a, double c) {  // keep a.x + c <= 0
    std::vector<Vector> out;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vector& p = poly[i];
      const Vector& q = poly[(i + 1) % poly.size()];
      const double fp = a.dot(p) + c, fq = a.dot(q) + c;
      if (fp <= 0.0) out.push_back(p);
      if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) out.push_back(p + (fp / (fp - fq)) * (q - p));
    }
    poly = std::move(out);
  };
  for (std::size_t j = 0; j < arr.size() && !poly.empty(); ++j) {
    const double s = region.test(j) ? -1.0 : 1.0;
    clip(s * arr.normals().row(static_cast<Eigen::Index>(j)).transpose(), s * arr.offsets()[static_cast<Eigen::Index>(j)]);
  }
  if (!poly.empty()) clip(t.W.row(0).transpose(), t.b[0]);
  return poly;
}

}  // namespace barrier_cert
