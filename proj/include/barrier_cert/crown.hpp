#pragma once

#include "barrier_cert/box.hpp"
#include "barrier_cert/lp.hpp"
#include "barrier_cert/nn.hpp"

#include <vector>

namespace barrier_cert {

/// A_lo x + b_lo <= net(x) <= A_up x + b_up for every x in domain.
struct LinearBounds {
  Matrix A_up;
  Vector b_up;
  Matrix A_lo;
  Vector b_lo;
  HyperRectangle domain;
};

/// m x 2 matrix: column 0 lower bounds, column 1 upper bounds.
using BoundMatrix = Matrix;

/// Lower-line slope for unstable ReLU neurons. Adaptive picks 1 when
/// u >= |l| and 0 otherwise; the fixed rules keep bounds monotone under
/// box refinement, which Adaptive does not guarantee.
enum class AlphaRule { Adaptive, Zero, One };

namespace detail {

/// Relaxation of relu(z) for z in [l, u]:
///   lower_slope * z <= relu(z) <= upper_slope * z + upper_offset.
struct ReluRelaxation {
  Vector lower_slope;
  Vector upper_slope;
  Vector upper_offset;
};

inline ReluRelaxation relax_relu(const Vector& l, const Vector& u, AlphaRule rule = AlphaRule::Adaptive) {
  const Eigen::Index m = l.size();
  ReluRelaxation r{Vector::Zero(m), Vector::Zero(m), Vector::Zero(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    if (l[i] >= 0.0) {
      r.lower_slope[i] = 1.0;
      r.upper_slope[i] = 1.0;
    } else if (u[i] <= 0.0) {
      // inactive: relu == 0
    } else {
      const double s = u[i] / (u[i] - l[i]);
      r.upper_slope[i] = s;
      r.upper_offset[i] = -s * l[i];
      switch (rule) {
        case AlphaRule::Adaptive: r.lower_slope[i] = u[i] >= -l[i] ? 1.0 : 0.0; break;
        case AlphaRule::Zero: r.lower_slope[i] = 0.0; break;
        case AlphaRule::One: r.lower_slope[i] = 1.0; break;
      }
    }
  }
  return r;
}

/// Backward pass bounding the pre-activation of layer `target` (the affine
/// output before its activation), given relaxations of every ReLU layer
/// before it.
inline LinearBounds backward_bounds(const std::vector<Layer>& layers, std::size_t target,
                                    const std::vector<ReluRelaxation>& relax, const HyperRectangle& box) {
  const auto& t = layers[target].map;
  Matrix up = t.W, lo = t.W;
  Vector bu = t.b, bl = t.b;
  for (std::size_t j = target; j-- > 0;) {
    const auto& layer = layers[j];
    if (layer.kind == LayerKind::ReLU) {
      const auto& r = relax[j];
      const Matrix up_pos = up.cwiseMax(0.0), up_neg = up.cwiseMin(0.0);
      const Matrix lo_pos = lo.cwiseMax(0.0), lo_neg = lo.cwiseMin(0.0);
      bu += up_pos * r.upper_offset;
      bl += lo_neg * r.upper_offset;
      up = up_pos * r.upper_slope.asDiagonal() + up_neg * r.lower_slope.asDiagonal();
      lo = lo_pos * r.lower_slope.asDiagonal() + lo_neg * r.upper_slope.asDiagonal();
    }
    bu += up * layer.map.b;
    bl += lo * layer.map.b;
    up = up * layer.map.W;
    lo = lo * layer.map.W;
  }
  return {std::move(up), std::move(bu), std::move(lo), std::move(bl), box};
}

}  // namespace detail

/// CROWN-style linear relaxation of `net` over `box`. Pre-activation bounds
/// of every ReLU layer are computed by a full backward pass over the
/// preceding prefix.
inline LinearBounds linear_relax(const NeuralNetwork& net, const HyperRectangle& box,
                                 AlphaRule rule = AlphaRule::Adaptive) {
  if (static_cast<Eigen::Index>(box.dim()) != net.in_dim()) {
    throw InputError("linear_relax: box has dim " + std::to_string(box.dim()) + ", network expects " +
                     std::to_string(net.in_dim()));
  }
  std::vector<Layer> layers = net.layers();
  if (layers.back().kind == LayerKind::ReLU) {
    layers.push_back(Layer{AffineMap::identity(net.out_dim()), LayerKind::Linear});
  }
  std::vector<detail::ReluRelaxation> relax(layers.size());
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    if (layers[k].kind != LayerKind::ReLU) continue;
    Vector l, u;
    if (k == 0) {
      std::tie(l, u) = box_bounds(layers[0].map, box);
    } else {
      const LinearBounds pre = detail::backward_bounds(layers, k, relax, box);
      l = box_bounds(AffineMap(pre.A_lo, pre.b_lo), box).first;
      u = box_bounds(AffineMap(pre.A_up, pre.b_up), box).second;
    }
    relax[k] = detail::relax_relu(l, u, rule);
  }
  return detail::backward_bounds(layers, layers.size() - 1, relax, box);
}

/// Interval enclosure of the network's image over `box`, one row per output.
inline BoundMatrix get_fn_bd(const NeuralNetwork& net, const HyperRectangle& box,
                             AlphaRule rule = AlphaRule::Adaptive) {
  const LinearBounds lb = linear_relax(net, box, rule);
  BoundMatrix e(lb.A_up.rows(), 2);
  e.col(0) = box_bounds(AffineMap(lb.A_lo, lb.b_lo), box).first;
  e.col(1) = box_bounds(AffineMap(lb.A_up, lb.b_up), box).second;
  return e;
}

}  // namespace barrier_cert
