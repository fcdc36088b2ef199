#include "barrier_cert/nn.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace barrier_cert;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

NeuralNetwork identity_net(Eigen::Index n, LayerKind kind = LayerKind::Linear) {
  return NeuralNetwork({Layer{AffineMap::identity(n), kind}});
}

// Hidden layer pre-activations, computed without the library.
Vector pre_activation(const ShallowNN& net, const Vector& x) { return net.hidden().W * x + net.hidden().b; }

}  // namespace

TEST(Evaluate, IdentityAffine) {
  EXPECT_EQ(evaluate(identity_net(2), vec({1, -2})), vec({1, -2}));
}

TEST(Evaluate, SingleRelu) {
  EXPECT_EQ(evaluate(identity_net(2, LayerKind::ReLU), vec({1, -2})), vec({1, 0}));
}

TEST(Evaluate, HandShallow) {
  Matrix w1(2, 1);
  w1 << 1, -1;
  Matrix w2(1, 2);
  w2 << 1, 1;
  ShallowNN net(AffineMap(w1, vec({0, 0})), AffineMap(w2, vec({-1})));
  EXPECT_DOUBLE_EQ(net(vec({0.5})), -0.5);
  EXPECT_DOUBLE_EQ(evaluate(net.network(), vec({0.5}))[0], -0.5);
}

TEST(Evaluate, DimensionMismatchThrows) {
  EXPECT_THROW(evaluate(identity_net(2), vec({1, 2, 3})), InputError);
}

TEST(NeuralNetwork, RejectsBrokenChain) {
  EXPECT_THROW(NeuralNetwork({Layer{AffineMap::identity(2), LayerKind::ReLU}, Layer{AffineMap::identity(3), LayerKind::Linear}}),
               InputError);
  EXPECT_THROW(AffineMap(Matrix::Zero(2, 2), Vector::Zero(3)), InputError);
}

TEST(Compose, IdentityOfIdentity) {
  const auto net = compose(identity_net(3), identity_net(3));
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const Vector x = testutil::random_vector(rng, 3);
    EXPECT_EQ(evaluate(net, x), x);
  }
}

TEST(Compose, MatchesNestedEvaluation) {
  std::mt19937_64 rng(7);
  const auto barrier = testutil::random_net(rng, {2, 20, 1});
  const auto dynamics = testutil::random_net(rng, {2, 16, 16, 2});
  const auto composed = compose(barrier, dynamics);
  EXPECT_EQ(composed.num_layers(), barrier.num_layers() + dynamics.num_layers() - 1);
  for (int k = 0; k < 100; ++k) {
    const Vector x = testutil::random_vector(rng, 2, 2.0);
    const double want = evaluate(barrier, evaluate(dynamics, x))[0];
    // Merging the affine maps reassociates one matrix product.
    EXPECT_NEAR(evaluate(composed, x)[0], want, 1e-12 * (1.0 + std::abs(want)));
  }
}

TEST(Compose, Associative) {
  std::mt19937_64 rng(8);
  const auto a = testutil::random_net(rng, {2, 5, 1});
  const auto b = testutil::random_net(rng, {2, 6, 2});
  const auto c = testutil::random_net(rng, {2, 7, 2});
  const auto left = compose(compose(a, b), c);
  const auto right = compose(a, compose(b, c));
  for (int k = 0; k < 100; ++k) {
    const Vector x = testutil::random_vector(rng, 2);
    EXPECT_NEAR(evaluate(left, x)[0], evaluate(right, x)[0], 1e-12);
  }
}

TEST(Compose, RejectsReluTail) {
  EXPECT_THROW(compose(identity_net(2), identity_net(2, LayerKind::ReLU)), InputError);
  EXPECT_THROW(compose(identity_net(3), identity_net(2)), InputError);
}

TEST(ShallowNN, RejectsWrongShape) {
  std::mt19937_64 rng(2);
  EXPECT_THROW(ShallowNN::from_network(testutil::random_net(rng, {2, 4, 4, 1})), InputError);
  EXPECT_THROW(ShallowNN(AffineMap::identity(2), AffineMap::identity(2)), InputError);
}

TEST(ActivationHyperplanes, RowsReadOff) {
  Matrix w2(1, 2);
  w2 << 1, 1;
  ShallowNN net(AffineMap::identity(2), AffineMap(w2, vec({0})));
  const auto hs = activation_hyperplanes(net);
  ASSERT_EQ(hs.size(), 2u);
  EXPECT_DOUBLE_EQ(hs[0].scalar(vec({3, 4})), 3);
  EXPECT_DOUBLE_EQ(hs[1].scalar(vec({3, 4})), 4);
}

TEST(ActivationHyperplanes, MatchPreActivations) {
  std::mt19937_64 rng(3);
  const auto net = testutil::random_shallow(rng, 3, 9);
  const auto hs = activation_hyperplanes(net);
  ASSERT_EQ(hs.size(), 9u);
  for (int k = 0; k < 100; ++k) {
    const Vector x = testutil::random_vector(rng, 3);
    const Vector pre = pre_activation(net, x);
    for (std::size_t i = 0; i < hs.size(); ++i) EXPECT_DOUBLE_EQ(hs[i].scalar(x), pre[static_cast<Eigen::Index>(i)]);
  }
}

TEST(LocalAffine, AllUnflippedIsConstant) {
  std::mt19937_64 rng(4);
  const auto net = testutil::random_shallow(rng, 2, 6);
  const auto t = local_affine(net, FlipSet(6));
  EXPECT_TRUE(t.W.isZero());
  EXPECT_DOUBLE_EQ(t.b[0], net.output().b[0]);
}

TEST(LocalAffine, AllFlippedIsFullProduct) {
  std::mt19937_64 rng(5);
  const auto net = testutil::random_shallow(rng, 2, 6);
  FlipSet all(6);
  for (std::size_t i = 0; i < 6; ++i) all.set(i);
  const auto t = local_affine(net, all);
  const Matrix want = net.output().W * net.hidden().W;
  EXPECT_LE((t.W - want).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LocalAffine, AgreesAtInteriorPoints) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = testutil::random_shallow(rng, 2, 10);
    for (int k = 0; k < 50; ++k) {
      const Vector x = testutil::random_vector(rng, 2, 2.0);
      const auto t = local_affine(net, activation_pattern(net, x));
      EXPECT_NEAR(t.scalar(x), net(x), 1e-9);
    }
  }
}

TEST(LocalAffine, PiecewiseAffineAlongSegments) {
  std::mt19937_64 rng(9);
  const auto net = testutil::random_shallow(rng, 2, 8);
  int checked = 0;
  for (int k = 0; k < 20000 && checked < 1000; ++k) {
    const Vector x = testutil::random_vector(rng, 2);
    const Vector y = x + testutil::random_vector(rng, 2, 0.05);
    if (!(activation_pattern(net, x) == activation_pattern(net, y))) continue;
    ++checked;
    EXPECT_NEAR(net(0.5 * (x + y)), 0.5 * (net(x) + net(y)), 1e-9);
  }
  EXPECT_EQ(checked, 1000);
}

TEST(LocalAffine, SizeMismatchThrows) {
  std::mt19937_64 rng(10);
  EXPECT_THROW(local_affine(testutil::random_shallow(rng, 2, 4), FlipSet(5)), InputError);
}
