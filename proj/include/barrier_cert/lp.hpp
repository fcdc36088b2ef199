#pragma once

#include "barrier_cert/box.hpp"
#include "barrier_cert/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace barrier_cert {

namespace tol {
inline constexpr double feas = 1e-8;   // constraint satisfaction of reported points
inline constexpr double opt = 1e-7;    // optimal cost accuracy
inline constexpr double face = 1e-7;   // slack LP "non-zero cost" threshold
inline constexpr double sign = 1e-9;   // a seed point closer than this to a hyperplane is degenerate
}  // namespace tol

enum class Relation { LessEq, Equal, GreaterEq };

/// a.x + c (relation) 0.
struct LinearConstraint {
  Vector a;
  double c = 0.0;
  Relation rel = Relation::LessEq;
};

/// maximize objective.x over free variables x subject to the constraints.
struct LinearProgram {
  Vector objective;
  std::vector<LinearConstraint> constraints;

  explicit LinearProgram(Vector obj) : objective(std::move(obj)) {}

  Eigen::Index num_vars() const { return objective.size(); }

  LinearProgram& add(Vector a, double c, Relation rel) {
    if (a.size() != objective.size()) throw InputError("LinearProgram: constraint dimension mismatch");
    constraints.push_back({std::move(a), c, rel});
    return *this;
  }
  LinearProgram& add_le(Vector a, double c) { return add(std::move(a), c, Relation::LessEq); }
  LinearProgram& add_ge(Vector a, double c) { return add(std::move(a), c, Relation::GreaterEq); }
  LinearProgram& add_eq(Vector a, double c) { return add(std::move(a), c, Relation::Equal); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct LpResult {
  LpStatus status = LpStatus::NumericalFailure;
  std::optional<Vector> x;
  std::optional<double> cost;

  bool optimal() const { return status == LpStatus::Optimal; }
};

/// Number of LPs solved by this process; read by the CLI run report.
inline std::atomic<std::uint64_t>& lp_solve_count() {
  static std::atomic<std::uint64_t> count{0};
  return count;
}

namespace detail {

/// Dictionary-form simplex for: max c.y  s.t.  A y <= b,  y >= 0.
/// Bland's rule for both entering and leaving choices, so degenerate
/// vertices (concurrent hyperplanes) cannot cycle.
class DictionarySimplex {
 public:
  enum class Outcome { Optimal, Infeasible, Unbounded, IterationLimit };

  DictionarySimplex(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                    const std::vector<double>& c)
      : m_(b.size()), n_(c.size()), cols_(n_ + 2), basic_(m_), nonbasic_(n_ + 1),
        t_((m_ + 2) * cols_, 0.0) {
    // Column n_ is the auxiliary phase-one variable, column n_+1 the rhs.
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) at(i, j) = A[i][j];
      at(i, n_) = -1.0;
      at(i, n_ + 1) = b[i];
      basic_[i] = static_cast<long>(n_ + i);
    }
    for (std::size_t j = 0; j < n_; ++j) {
      nonbasic_[j] = static_cast<long>(j);
      at(m_, j) = -c[j];
    }
    nonbasic_[n_] = kAux;
    at(m_ + 1, n_) = 1.0;
    iteration_limit_ = 200 * (m_ + n_ + 10);
  }

  Outcome solve(std::vector<double>& y, double& cost) {
    std::size_t r = 0;
    for (std::size_t i = 1; i < m_; ++i) {
      if (at(i, n_ + 1) < at(r, n_ + 1)) r = i;
    }
    if (m_ > 0 && at(r, n_ + 1) < -kEps) {
      pivot(r, n_);
      const Outcome p1 = run(m_ + 1, true);
      if (p1 == Outcome::IterationLimit) return p1;
      if (at(m_ + 1, n_ + 1) < -kFeasEps) return Outcome::Infeasible;
      for (std::size_t i = 0; i < m_; ++i) {
        if (basic_[i] != kAux) continue;
        std::size_t s = cols_;
        for (std::size_t j = 0; j < n_ + 1; ++j) {
          if (nonbasic_[j] == kAux || std::abs(at(i, j)) <= kEps) continue;
          if (s == cols_ || std::abs(at(i, j)) > std::abs(at(i, s))) s = j;
        }
        if (s != cols_) pivot(i, s);
      }
    }
    const Outcome p2 = run(m_, false);
    if (p2 != Outcome::Optimal) return p2;
    y.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (basic_[i] >= 0 && static_cast<std::size_t>(basic_[i]) < n_) y[static_cast<std::size_t>(basic_[i])] = at(i, n_ + 1);
    }
    cost = at(m_, n_ + 1);
    return Outcome::Optimal;
  }

 private:
  static constexpr long kAux = -1;
  static constexpr double kEps = 1e-11;
  static constexpr double kFeasEps = 1e-9;
  // Smaller pivots are treated as zero: dividing by them turns roundoff
  // into violations of order one.
  static constexpr double kPivotEps = 1e-9;

  double& at(std::size_t i, std::size_t j) { return t_[i * cols_ + j]; }

  void pivot(std::size_t r, std::size_t s) {
    const double inv = 1.0 / at(r, s);
    for (std::size_t i = 0; i < m_ + 2; ++i) {
      if (i == r) continue;
      const double f = at(i, s) * inv;
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols_; ++j) {
        if (j != s) at(i, j) -= at(r, j) * f;
      }
      at(i, s) = -f;
    }
    for (std::size_t j = 0; j < cols_; ++j) {
      if (j != s) at(r, j) *= inv;
    }
    at(r, s) = inv;
    std::swap(basic_[r], nonbasic_[s]);
  }

  Outcome run(std::size_t obj_row, bool phase_one) {
    for (std::size_t it = 0; it < iteration_limit_; ++it) {
      // Bland: smallest variable label among improving columns.
      std::size_t s = cols_;
      for (std::size_t j = 0; j < n_ + 1; ++j) {
        if (!phase_one && nonbasic_[j] == kAux) continue;
        if (at(obj_row, j) >= -kEps) continue;
        if (s == cols_ || nonbasic_[j] < nonbasic_[s]) s = j;
      }
      if (s == cols_) return Outcome::Optimal;
      std::size_t r = m_;
      double best = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        if (at(i, s) <= kPivotEps) continue;
        const double ratio = at(i, n_ + 1) / at(i, s);
        if (r == m_ || ratio < best - kEps || (ratio <= best + kEps && basic_[i] < basic_[r])) {
          r = i;
          best = ratio;
        }
      }
      if (r == m_) return Outcome::Unbounded;
      pivot(r, s);
    }
    return Outcome::IterationLimit;
  }

  std::size_t m_, n_, cols_;
  std::vector<long> basic_, nonbasic_;
  std::vector<double> t_;
  std::size_t iteration_limit_;
};

}  // namespace detail

/// Solves `lp`. Free variables are split into positive and negative parts;
/// equalities become two inequalities. The returned point is re-checked
/// against the original constraints; a violation larger than tol::feas is
/// reported as NumericalFailure rather than trusted.
inline LpResult solve(const LinearProgram& lp) {
  lp_solve_count().fetch_add(1, std::memory_order_relaxed);
  const auto n = static_cast<std::size_t>(lp.num_vars());
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  A.reserve(lp.constraints.size() * 2);
  auto push_row = [&](const Vector& a, double rhs, double sgn) {
    std::vector<double> row(2 * n);
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = sgn * a[static_cast<Eigen::Index>(j)];
      row[n + j] = -sgn * a[static_cast<Eigen::Index>(j)];
    }
    A.push_back(std::move(row));
    b.push_back(sgn * rhs);
  };
  for (const auto& con : lp.constraints) {
    // a.x + c <= 0  <=>  a.x <= -c
    switch (con.rel) {
      case Relation::LessEq: push_row(con.a, -con.c, 1.0); break;
      case Relation::GreaterEq: push_row(con.a, -con.c, -1.0); break;
      case Relation::Equal:
        push_row(con.a, -con.c, 1.0);
        push_row(con.a, -con.c, -1.0);
        break;
    }
  }
  std::vector<double> c(2 * n);
  for (std::size_t j = 0; j < n; ++j) {
    c[j] = lp.objective[static_cast<Eigen::Index>(j)];
    c[n + j] = -lp.objective[static_cast<Eigen::Index>(j)];
  }

  detail::DictionarySimplex simplex(A, b, c);
  std::vector<double> y;
  double cost = 0.0;
  LpResult res;
  switch (simplex.solve(y, cost)) {
    case detail::DictionarySimplex::Outcome::Infeasible: res.status = LpStatus::Infeasible; return res;
    case detail::DictionarySimplex::Outcome::Unbounded: res.status = LpStatus::Unbounded; return res;
    case detail::DictionarySimplex::Outcome::IterationLimit: res.status = LpStatus::NumericalFailure; return res;
    case detail::DictionarySimplex::Outcome::Optimal: break;
  }
  Vector x(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) x[static_cast<Eigen::Index>(j)] = y[j] - y[n + j];
  for (const auto& con : lp.constraints) {
    const double v = con.a.dot(x) + con.c;
    const double scale = std::max(1.0, con.a.cwiseAbs().dot(x.cwiseAbs()) + std::abs(con.c));
    const double viol = con.rel == Relation::LessEq    ? v
                        : con.rel == Relation::GreaterEq ? -v
                                                         : std::abs(v);
    if (viol > tol::feas * scale) {
      res.status = LpStatus::NumericalFailure;
      return res;
    }
  }
  res.status = LpStatus::Optimal;
  res.cost = lp.objective.dot(x);
  res.x = std::move(x);
  return res;
}

/// Exact interval image of an affine map over a box.
inline std::pair<Vector, Vector> box_bounds(const AffineMap& f, const HyperRectangle& box) {
  if (f.in_dim() != static_cast<Eigen::Index>(box.dim())) throw InputError("box_bounds: dimension mismatch");
  const Matrix wl = f.W * box.lo().asDiagonal();
  const Matrix wh = f.W * box.hi().asDiagonal();
  Vector lo = f.b + wl.cwiseMin(wh).rowwise().sum();
  Vector hi = f.b + wl.cwiseMax(wh).rowwise().sum();
  return {std::move(lo), std::move(hi)};
}

}  // namespace barrier_cert
