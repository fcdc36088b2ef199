#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace barrier_cert {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown for malformed inputs: dimension mismatches, schema violations,
/// invalid seeds.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a numerical routine (LP, bounding) cannot produce a
/// trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Short decimal for error messages.
inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

/// Axis-aligned box {x : lo <= x <= hi}.
class HyperRectangle {
 public:
  HyperRectangle() = default;
  HyperRectangle(Vector lo, Vector hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size()) {
      throw InputError("HyperRectangle: lo/hi dimension mismatch");
    }
    for (Eigen::Index i = 0; i < lo_.size(); ++i) {
      if (!(lo_[i] <= hi_[i])) {
        throw InputError("HyperRectangle: lo > hi in coordinate " + std::to_string(i));
      }
    }
  }

  static HyperRectangle cube(const Vector& center, double radius) {
    return {center.array() - radius, center.array() + radius};
  }

  std::size_t dim() const { return static_cast<std::size_t>(lo_.size()); }
  const Vector& lo() const { return lo_; }
  const Vector& hi() const { return hi_; }
  Vector center() const { return 0.5 * (lo_ + hi_); }
  Vector widths() const { return hi_ - lo_; }
  double max_width() const { return dim() == 0 ? 0.0 : widths().maxCoeff(); }

  double volume() const {
    double v = 1.0;
    for (Eigen::Index i = 0; i < lo_.size(); ++i) v *= hi_[i] - lo_[i];
    return v;
  }

  bool contains(const Vector& x, double tol = 0.0) const {
    return ((x.array() >= lo_.array() - tol) && (x.array() <= hi_.array() + tol)).all();
  }

  bool contains(const HyperRectangle& other, double tol = 0.0) const {
    return ((other.lo_.array() >= lo_.array() - tol) && (other.hi_.array() <= hi_.array() + tol)).all();
  }

  /// True when the open interiors intersect.
  bool interiors_overlap(const HyperRectangle& other) const {
    return ((lo_.array() < other.hi_.array()) && (other.lo_.array() < hi_.array())).all();
  }

  /// The 2^n children obtained by cutting every axis at its midpoint.
  /// Child k takes the upper half of axis i iff bit i of k is set.
  std::vector<HyperRectangle> split_midpoint() const {
    const std::size_t n = dim();
    const Vector mid = center();
    std::vector<HyperRectangle> children;
    children.reserve(std::size_t{1} << n);
    for (std::size_t k = 0; k < (std::size_t{1} << n); ++k) {
      Vector lo = lo_, hi = hi_;
      for (std::size_t i = 0; i < n; ++i) {
        if ((k >> i) & 1U) {
          lo[i] = mid[i];
        } else {
          hi[i] = mid[i];
        }
      }
      children.emplace_back(std::move(lo), std::move(hi));
    }
    return children;
  }

  /// Corner k selects hi in axis i iff bit i of k is set.
  Vector corner(std::size_t k) const {
    Vector c = lo_;
    for (std::size_t i = 0; i < dim(); ++i) {
      if ((k >> i) & 1U) c[i] = hi_[i];
    }
    return c;
  }

  friend bool operator==(const HyperRectangle& a, const HyperRectangle& b) {
    return a.lo_.size() == b.lo_.size() && a.lo_ == b.lo_ && a.hi_ == b.hi_;
  }

 private:
  Vector lo_;
  Vector hi_;
};

/// n x 2 matrix of [min, max] per coordinate of a box.
inline Matrix get_extents(const HyperRectangle& box) {
  Matrix e(box.dim(), 2);
  e.col(0) = box.lo();
  e.col(1) = box.hi();
  return e;
}

inline HyperRectangle box_from_extents(const Matrix& e) {
  if (e.cols() != 2) throw InputError("extents must have two columns");
  return {e.col(0), e.col(1)};
}

/// Lexicographic order on lo, then hi. Used to normalize box lists.
inline bool box_less(const HyperRectangle& a, const HyperRectangle& b) {
  for (std::size_t i = 0; i < a.dim(); ++i) {
    if (a.lo()[i] != b.lo()[i]) return a.lo()[i] < b.lo()[i];
  }
  for (std::size_t i = 0; i < a.dim(); ++i) {
    if (a.hi()[i] != b.hi()[i]) return a.hi()[i] < b.hi()[i];
  }
  return false;
}

inline HyperRectangle bounding_box(const std::vector<HyperRectangle>& boxes) {
  if (boxes.empty()) throw InputError("bounding_box of empty list");
  Vector lo = boxes.front().lo(), hi = boxes.front().hi();
  for (const auto& b : boxes) {
    lo = lo.cwiseMin(b.lo());
    hi = hi.cwiseMax(b.hi());
  }
  return {lo, hi};
}

}  // namespace barrier_cert
