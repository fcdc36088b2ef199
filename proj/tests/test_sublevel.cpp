#include "barrier_cert/io.hpp"
#include "barrier_cert/sublevel.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <deque>
#include <set>

using namespace barrier_cert;

namespace {

std::set<Region> as_set(const SubLevelComponent& c) {
  const auto v = c.sorted_regions();
  return {v.begin(), v.end()};
}

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double d : v) x[k++] = d;
  return x;
}

ShallowNN shallow(const Matrix& W, const Vector& b, const Matrix& W2, double b2) {
  return {AffineMap{W, b}, AffineMap{W2, Vector::Constant(1, b2)}};
}

/// Four lines x1 +- x2 = +-1; negative on the central square and on the
/// strips and corners next to it, positive further out.
ShallowNN diamond() {
  Matrix W(4, 2);
  W << 1, 1, -1, -1, 1, -1, -1, 1;
  return shallow(W, Vector::Constant(4, -1.0), Matrix::Ones(1, 4), -0.5);
}

/// 1-D W shape: negative on (-3,-1) and on (1,3). Breakpoints at -10, -2, 0, 2.
ShallowNN w_shape() {
  Matrix W(5, 1);
  W << -1, 1, 1, 1, 1;
  Matrix W2(1, 5);
  W2 << 1, -1, 2, -2, 2;
  return shallow(W, vec({-10, 10, 2, 0, -2}), W2, 7.0);
}

/// A point of `box` where net < -0.05, or nullopt.
std::optional<Vector> negative_point(std::mt19937_64& rng, const ShallowNN& net, const HyperRectangle& box) {
  for (int k = 0; k < 2000; ++k) {
    Vector x = testutil::uniform_in(rng, box);
    if (net(x) < -0.05) return x;
  }
  return std::nullopt;
}

/// Activation patterns met by a 4-connected flood fill of {net < 0} on a
/// grid over `box`, started from the grid point nearest x0.
std::set<Region> grid_component(const ShallowNN& net, const HyperRectangle& box, const Vector& x0, int steps) {
  const Vector h = box.widths() / steps;
  auto point = [&](int i, int j) { return Vector(box.lo() + Vector(h.array() * vec({double(i), double(j)}).array())); };
  std::vector<char> seen(static_cast<std::size_t>((steps + 1) * (steps + 1)), 0);
  const int i0 = int(std::lround((x0[0] - box.lo()[0]) / h[0])), j0 = int(std::lround((x0[1] - box.lo()[1]) / h[1]));
  std::deque<std::pair<int, int>> q{{i0, j0}};
  seen[static_cast<std::size_t>(i0 * (steps + 1) + j0)] = 1;
  std::set<Region> out;
  while (!q.empty()) {
    auto [i, j] = q.front();
    q.pop_front();
    out.insert(activation_pattern(net, point(i, j)));
    for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const int a = i + di, b = j + dj;
      if (a < 0 || b < 0 || a > steps || b > steps) continue;
      auto& s = seen[static_cast<std::size_t>(a * (steps + 1) + b)];
      if (s || !(net(point(a, b)) < 0.0)) continue;
      s = 1;
      q.emplace_back(a, b);
    }
  }
  return out;
}

}  // namespace

TEST(SubLevel, MatchesOracleOnRandomNets) {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = 2 + trial % 2;
    const auto net = testutil::random_shallow(rng, n, 5 + trial % 4);
    const auto x0 = negative_point(rng, net, HyperRectangle::cube(Vector::Zero(n), 2.0));
    if (!x0) continue;
    const auto comp = enumerate_sublevel_component(net, *x0);
    const auto expect = oracle::sublevel_component(net, activation_pattern(net, *x0));
    EXPECT_EQ(as_set(comp), expect) << "trial " << trial;
    ++checked;
  }
  EXPECT_GE(checked, 30);
}

TEST(SubLevel, OptionsDoNotChangeTheResult) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 12; ++trial) {
    const auto net = testutil::random_shallow(rng, 2, 7);
    const auto x0 = negative_point(rng, net, HyperRectangle::cube(Vector::Zero(2), 2.0));
    if (!x0) continue;
    const auto base = as_set(enumerate_sublevel_component(net, *x0));
    EXPECT_EQ(as_set(enumerate_sublevel_component(net, *x0, {}, {1, false, true})), base);
    EXPECT_EQ(as_set(enumerate_sublevel_component(net, *x0, {}, {4, true, true})), base);
    const auto fwd = as_set(enumerate_sublevel_component(net, *x0, {}, {1, true, false}));
    EXPECT_TRUE(std::includes(base.begin(), base.end(), fwd.begin(), fwd.end()));
  }
}

TEST(SubLevel, ConfinedMatchesOracleWithinBox) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 15; ++trial) {
    const auto net = testutil::random_shallow(rng, 2, 6);
    const HyperRectangle box = HyperRectangle::cube(Vector::Zero(2), 1.5);
    const auto x0 = negative_point(rng, net, box);
    if (!x0) continue;
    const auto comp = enumerate_sublevel_component(net, *x0, {box});
    // Oracle: the same graph search with the box faces as strict constraints.
    const Arrangement arr = Arrangement::of(net);
    const auto walls = box_interior_constraints(box);
    std::set<Region> seen{activation_pattern(net, *x0)};
    std::deque<Region> q{*seen.begin()};
    while (!q.empty()) {
      const Region r = q.front();
      q.pop_front();
      auto strict = walls;
      strict.push_back(local_affine(net, r));
      for (std::size_t i = 0; i < arr.size(); ++i) {
        if (seen.count(r.flipped(i))) continue;
        if (oracle::slack_cost(arr, r, i, strict) > tol::face) {
          seen.insert(r.flipped(i));
          q.push_back(r.flipped(i));
        }
      }
    }
    EXPECT_EQ(as_set(comp), seen) << "trial " << trial;
  }
}

TEST(SubLevel, FoldBackFixtureNeedsBackwardPass) {
  const auto net = io::load_shallow(FIXTURE_DIR "/fold_back/barrier.json");
  const Vector x0 = Vector::Zero(2);
  const auto comp = enumerate_sublevel_component(net, x0);
  const auto fwd = enumerate_sublevel_component(net, x0, {}, {1, true, false});
  EXPECT_EQ(comp.size(), 10u);
  EXPECT_EQ(fwd.size(), 8u);
  EXPECT_EQ(as_set(comp), oracle::sublevel_component(net, comp.seed_region));

  const Region& r0 = comp.seed_region;
  const Region r3 = r0.flipped(0).flipped(2);
  const Region r4 = r0.flipped(0);
  ASSERT_TRUE(comp.contains(r4));
  const auto* rec = comp.regions.find(r4);
  EXPECT_EQ(rec->how, Discovery::Backward);
  EXPECT_EQ(rec->discovered_by, 2);
  const auto folds = detect_fold_back_faces(comp.arrangement, r3, local_affine(net, r3), r0);
  EXPECT_NE(std::find(folds.begin(), folds.end(), 2u), folds.end());
  EXPECT_FALSE(fwd.contains(r4));
}

TEST(SubLevel, FoldBackFixtureAgreesWithGridSampling) {
  const auto net = io::load_shallow(FIXTURE_DIR "/fold_back/barrier.json");
  const Vector x0 = Vector::Zero(2);
  const auto comp = enumerate_sublevel_component(net, x0);
  const auto grid = grid_component(net, HyperRectangle::cube(x0, 8.0), x0, 800);
  EXPECT_EQ(grid, as_set(comp));
}

TEST(SubLevel, WShapeHasTwoComponents) {
  const auto net = w_shape();
  const auto left = enumerate_sublevel_component(net, vec({-1.5}));
  const auto right = enumerate_sublevel_component(net, vec({1.5}));
  EXPECT_EQ(left.size(), 2u);
  EXPECT_EQ(right.size(), 2u);
  for (const auto& r : left.sorted_regions()) EXPECT_FALSE(right.contains(r));
  EXPECT_TRUE(left.contains_point(net, vec({-2.9})));
  EXPECT_FALSE(left.contains_point(net, vec({2.0})));
  EXPECT_FALSE(left.contains_point(net, vec({-3.5})));
}

TEST(SubLevel, NegatedNetSwapsSides) {
  // -W is negative exactly where W is positive: around 0 and beyond +-3.
  const auto neg = w_shape().negated();
  const auto mid = enumerate_sublevel_component(neg, vec({0.5}));
  EXPECT_EQ(mid.size(), 2u);
  EXPECT_TRUE(mid.contains(activation_pattern(neg, vec({-0.5}))));
  EXPECT_FALSE(mid.contains(activation_pattern(neg, vec({5.0}))));
}

TEST(SubLevel, SeedMustBeNegative) {
  EXPECT_THROW(enumerate_sublevel_component(w_shape(), vec({0.0})), SeedNotNegative);
  EXPECT_THROW(enumerate_sublevel_component(w_shape(), vec({-1.5}), {HyperRectangle(vec({0}), vec({1}))}),
               SeedOutsideConfinement);
}

TEST(SubLevel, SingleRegionInsideSmallBox) {
  Matrix W(1, 2);
  W << 1, 0;
  const auto net = shallow(W, vec({10}), Matrix::Ones(1, 1), -20.0);
  const auto comp = enumerate_sublevel_component(net, vec({0, 0}), {HyperRectangle::cube(Vector::Zero(2), 1.0)});
  EXPECT_EQ(comp.size(), 1u);
  EXPECT_EQ(comp.entries.size(), 1u);
  const auto rep = check_containment(comp);
  EXPECT_FALSE(rep.contained);
  EXPECT_EQ(rep.lps, 4u);
  EXPECT_EQ(rep.hits.size(), 4u);
}

TEST(SubLevel, DiamondIsContainedAndStitched) {
  const auto net = diamond();
  const Vector x0 = vec({0.1, 0.05});
  EXPECT_EQ(enumerate_sublevel_component(net, x0).size(), 9u);

  const auto big = enumerate_sublevel_component(net, x0, {HyperRectangle::cube(Vector::Zero(2), 3.0)});
  EXPECT_EQ(big.size(), 9u);
  EXPECT_TRUE(check_containment(big).contained);

  std::vector<HyperRectangle> quads;
  for (double a : {-3.0, 0.0}) {
    for (double b : {-3.0, 0.0}) quads.emplace_back(vec({a, b}), vec({a + 3, b + 3}));
  }
  const auto split = enumerate_sublevel_component(net, x0, quads);
  EXPECT_EQ(split.size(), 9u);
  EXPECT_TRUE(check_containment(split).contained);
  std::size_t stitched = 0;
  for (const auto& e : split.entries) stitched += e.how == Discovery::Stitch;
  EXPECT_GT(stitched, 0u);
  // 4 central-square pieces, 4 strips, 4 corners cut in two.
  EXPECT_EQ(split.entries.size(), 16u);

  const auto small = enumerate_sublevel_component(net, x0, {HyperRectangle::cube(Vector::Zero(2), 0.5)});
  const auto rep = check_containment(small);
  EXPECT_FALSE(rep.contained);
  EXPECT_EQ(rep.hits.size(), 4u);
}

TEST(SubLevel, ConfinementFaces) {
  std::vector<HyperRectangle> cells{HyperRectangle(vec({0, 0}), vec({2, 2})), HyperRectangle(vec({2, 0}), vec({3, 1}))};
  const auto conf = make_confinement(cells);
  ASSERT_EQ(conf.shared.size(), 2u);
  EXPECT_EQ(conf.shared[0].from, 0u);
  EXPECT_EQ(conf.shared[0].face.piece.lo(), vec({2, 0}));
  EXPECT_EQ(conf.shared[0].face.piece.hi(), vec({2, 1}));
  // Cell 0: 3 whole faces plus the uncovered half of x1 = 2; cell 1: 3 faces.
  EXPECT_EQ(conf.boundary.size(), 7u);
  EXPECT_THROW(make_confinement({HyperRectangle(vec({0, 0}), vec({2, 2})), HyperRectangle(vec({1, 1}), vec({3, 3}))}),
               InputError);
}

TEST(SubLevel, BoundaryClassification) {
  const auto comp = enumerate_sublevel_component(w_shape(), vec({-1.5}));
  std::size_t zero = 0, walls = 0;
  for (const auto& f : classify_boundary(comp)) (f.hyperplane == kZeroCrossing ? zero : walls) += 1;
  EXPECT_EQ(zero, 2u);   // x = -3 and x = -1
  EXPECT_EQ(walls, 1u);  // x = 0; the doubled hyperplane at -10 has no face
}
