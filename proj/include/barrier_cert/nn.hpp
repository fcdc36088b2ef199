#pragma once

#include "barrier_cert/box.hpp"
#include "barrier_cert/flip_set.hpp"

#include <string>
#include <utility>
#include <vector>

namespace barrier_cert {

/// x -> W x + b.
struct AffineMap {
  Matrix W;
  Vector b;

  AffineMap() = default;
  AffineMap(Matrix w, Vector bias) : W(std::move(w)), b(std::move(bias)) {
    if (W.rows() != b.size()) {
      throw InputError("AffineMap: rows(W)=" + std::to_string(W.rows()) +
                       " but len(b)=" + std::to_string(b.size()));
    }
  }

  /// Scalar functional w.x + c.
  static AffineMap functional(const Vector& w, double c) {
    Matrix W(1, w.size());
    W.row(0) = w.transpose();
    Vector b(1);
    b[0] = c;
    return {std::move(W), std::move(b)};
  }

  static AffineMap identity(Eigen::Index n) { return {Matrix::Identity(n, n), Vector::Zero(n)}; }

  Eigen::Index in_dim() const { return W.cols(); }
  Eigen::Index out_dim() const { return W.rows(); }

  Vector operator()(const Vector& x) const { return W * x + b; }

  /// Value of a scalar (1-row) map.
  double scalar(const Vector& x) const { return W.row(0).dot(x) + b[0]; }

  AffineMap row(Eigen::Index i) const { return {W.row(i), b.segment(i, 1)}; }

  AffineMap operator-() const { return {-W, -b}; }
};

enum class LayerKind { Linear, ReLU };

inline const char* to_string(LayerKind k) { return k == LayerKind::ReLU ? "relu" : "linear"; }

struct Layer {
  AffineMap map;
  LayerKind kind = LayerKind::Linear;

  Vector apply(const Vector& z) const {
    Vector y = map(z);
    if (kind == LayerKind::ReLU) y = y.cwiseMax(0.0);
    return y;
  }
};

/// Layered ReLU/affine network.
class NeuralNetwork {
 public:
  NeuralNetwork() = default;
  explicit NeuralNetwork(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw InputError("NeuralNetwork: no layers");
    for (std::size_t i = 1; i < layers_.size(); ++i) {
      if (layers_[i].map.in_dim() != layers_[i - 1].map.out_dim()) {
        throw InputError("NeuralNetwork: layer " + std::to_string(i) + " expects input dim " +
                         std::to_string(layers_[i].map.in_dim()) + " but layer " +
                         std::to_string(i - 1) + " outputs " +
                         std::to_string(layers_[i - 1].map.out_dim()));
      }
    }
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t num_layers() const { return layers_.size(); }
  Eigen::Index in_dim() const { return layers_.front().map.in_dim(); }
  Eigen::Index out_dim() const { return layers_.back().map.out_dim(); }

 private:
  std::vector<Layer> layers_;
};

inline Vector evaluate(const NeuralNetwork& net, const Vector& x) {
  if (x.size() != net.in_dim()) {
    throw InputError("evaluate: input has dim " + std::to_string(x.size()) + ", network expects " +
                     std::to_string(net.in_dim()));
  }
  Vector z = x;
  for (const auto& layer : net.layers()) z = layer.apply(z);
  return z;
}

/// Network computing outer(inner(x)). The final (linear) layer of `inner`
/// is folded into the first layer of `outer`.
inline NeuralNetwork compose(const NeuralNetwork& outer, const NeuralNetwork& inner) {
  if (inner.out_dim() != outer.in_dim()) {
    throw InputError("compose: inner outputs " + std::to_string(inner.out_dim()) +
                     " but outer expects " + std::to_string(outer.in_dim()));
  }
  if (inner.layers().back().kind != LayerKind::Linear) {
    throw InputError("compose: inner network must end in a linear layer");
  }
  std::vector<Layer> layers(inner.layers().begin(), inner.layers().end() - 1);
  const auto& last = inner.layers().back().map;
  const auto& first = outer.layers().front();
  layers.push_back(Layer{AffineMap(first.map.W * last.W, first.map.W * last.b + first.map.b), first.kind});
  layers.insert(layers.end(), outer.layers().begin() + 1, outer.layers().end());
  return NeuralNetwork(std::move(layers));
}

/// Two-layer network: a ReLU hidden layer followed by a scalar linear
/// output. Its activation boundaries are hyperplanes.
class ShallowNN {
 public:
  ShallowNN() = default;
  ShallowNN(AffineMap hidden, AffineMap output) : hidden_(std::move(hidden)), output_(std::move(output)) {
    if (output_.out_dim() != 1) throw InputError("ShallowNN: output layer must be scalar");
    if (output_.in_dim() != hidden_.out_dim()) {
      throw InputError("ShallowNN: output layer expects " + std::to_string(output_.in_dim()) +
                       " inputs but hidden layer has " + std::to_string(hidden_.out_dim()) + " neurons");
    }
  }

  static ShallowNN from_network(const NeuralNetwork& net) {
    const auto& ls = net.layers();
    if (ls.size() != 2 || ls[0].kind != LayerKind::ReLU || ls[1].kind != LayerKind::Linear) {
      throw InputError("ShallowNN: expected exactly [relu, linear] layers");
    }
    return {ls[0].map, ls[1].map};
  }

  NeuralNetwork network() const {
    return NeuralNetwork({Layer{hidden_, LayerKind::ReLU}, Layer{output_, LayerKind::Linear}});
  }

  const AffineMap& hidden() const { return hidden_; }
  const AffineMap& output() const { return output_; }
  Eigen::Index in_dim() const { return hidden_.in_dim(); }
  std::size_t num_neurons() const { return static_cast<std::size_t>(hidden_.out_dim()); }

  double operator()(const Vector& x) const {
    if (x.size() != in_dim()) throw InputError("ShallowNN: input dimension mismatch");
    return output_.scalar(hidden_(x).cwiseMax(0.0));
  }

  /// The network -N (negated output layer).
  ShallowNN negated() const { return {hidden_, -output_}; }

 private:
  AffineMap hidden_;
  AffineMap output_;
};

/// Row i of the hidden layer, as a scalar functional; list order is the
/// hyperplane ordering.
inline std::vector<AffineMap> activation_hyperplanes(const ShallowNN& net) {
  std::vector<AffineMap> out;
  out.reserve(net.num_neurons());
  for (Eigen::Index i = 0; i < net.hidden().out_dim(); ++i) out.push_back(net.hidden().row(i));
  return out;
}

/// Neurons with positive pre-activation at x.
inline FlipSet activation_pattern(const ShallowNN& net, const Vector& x) {
  const Vector pre = net.hidden()(x);
  FlipSet f(net.num_neurons());
  for (Eigen::Index i = 0; i < pre.size(); ++i) {
    if (pre[i] > 0.0) f.set(static_cast<std::size_t>(i));
  }
  return f;
}

/// The affine map the network equals on the region with the given flips:
/// inactive neurons are nulled.
inline AffineMap local_affine(const ShallowNN& net, const FlipSet& flips) {
  if (flips.size() != net.num_neurons()) {
    throw InputError("local_affine: region is over " + std::to_string(flips.size()) +
                     " hyperplanes, network has " + std::to_string(net.num_neurons()) + " neurons");
  }
  Vector gate(static_cast<Eigen::Index>(flips.size()));
  for (std::size_t i = 0; i < flips.size(); ++i) gate[static_cast<Eigen::Index>(i)] = flips.test(i) ? 1.0 : 0.0;
  const Matrix gated_w2 = net.output().W * gate.asDiagonal();
  return {gated_w2 * net.hidden().W, gated_w2 * net.hidden().b + net.output().b};
}

}  // namespace barrier_cert
