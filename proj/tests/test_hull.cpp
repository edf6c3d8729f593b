#include <gtest/gtest.h>

#include <random>

#include "subgrad/hull.hpp"
#include "subgrad/selection.hpp"
#include "support.hpp"

using namespace subgrad;
using testing_support::brute_min_norm;

namespace {

const std::vector<Vector> kTripodGradients{{-2.0, 0.0}, {1.0, 1.0}, {1.0, -1.0}};

std::vector<Vector> random_vertices(std::mt19937_64& rng, std::size_t k, std::size_t n,
                                    double shift = 0.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vector> vs(k, Vector(n));
  for (auto& v : vs)
    for (auto& x : v) x = g(rng) + shift;
  return vs;
}

}  // namespace

TEST(MinNorm, SegmentSymmetricMidpoint) {
  const auto p = min_norm_point({{1.0, 1.0}, {1.0, -1.0}});
  EXPECT_NEAR(p.point[0], 1.0, 1e-15);
  EXPECT_NEAR(p.point[1], 0.0, 1e-15);
  EXPECT_NEAR(p.weights[0], 0.5, 1e-15);
}

TEST(MinNorm, OriginInsideTripodHull) {
  const auto p = min_norm_point(kTripodGradients);
  EXPECT_NEAR(norm(p.point), 0.0, 1e-15);
  for (double w : p.weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-12);
}

TEST(MinNorm, SingleVertex) {
  const auto p = min_norm_point({{2.0, 0.0}});
  EXPECT_EQ(p.point, (Vector{2.0, 0.0}));
}

TEST(MinNorm, EmptyThrows) { EXPECT_THROW(min_norm_point({}), InputError); }

TEST(MinNorm, SegmentEndpointWhenProjectionOutside) {
  const auto p = min_norm_point({{1.0, 0.0}, {3.0, 1.0}});
  EXPECT_EQ(p.point, (Vector{1.0, 0.0}));
}

TEST(MinNorm, MatchesFaceEnumerationInThePlane) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t k = 1 + trial % 9;
    const auto vs = random_vertices(rng, k, 2, trial % 2 ? 0.8 : 0.0);
    EXPECT_NEAR(norm(min_norm_point(vs).point), brute_min_norm(vs), 1e-12) << "trial " << trial;
  }
}

TEST(MinNorm, MatchesFaceEnumerationInHigherDimensions) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 1 + trial % 9;
    const auto vs = random_vertices(rng, k, 3 + trial % 3, trial % 2 ? 0.7 : 0.0);
    const double tol = 1e-12;
    EXPECT_NEAR(norm(min_norm_point(vs).point), brute_min_norm(vs), tol) << "trial " << trial;
  }
}

TEST(MinNorm, WeightsReproducePoint) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto vs = random_vertices(rng, 2 + trial % 6, 2 + trial % 2);
    const auto p = min_norm_point(vs);
    double total = 0.0;
    Vector q(vs.front().size(), 0.0);
    for (std::size_t j = 0; j < vs.size(); ++j) {
      EXPECT_GE(p.weights[j], 0.0);
      total += p.weights[j];
      for (std::size_t c = 0; c < q.size(); ++c) q[c] += p.weights[j] * vs[j][c];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_NEAR(distance(q, p.point), 0.0, 1e-12);
  }
}

TEST(DistToCritical, Examples) {
  EXPECT_NEAR(dist_to_critical(SubdiffDescription::hull(kTripodGradients)), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(dist_to_critical(SubdiffDescription::single({2.0, 0.0})), 2.0);
  EXPECT_NEAR(dist_to_critical(SubdiffDescription::hull({{1.0, 1.0}, {1.0, -1.0}})), 1.0, 1e-15);
}

TEST(DistToCritical, RejectsEmptyDescription) {
  EXPECT_THROW(dist_to_critical(SubdiffDescription{}), InputError);
}

TEST(DistToCritical, OneLipschitzUnderVertexJitter) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + trial % 6;
    const auto vs = random_vertices(rng, k, 2, trial % 3 == 0 ? 1.0 : 0.0);
    const double delta = std::pow(10.0, -1.0 - trial % 6);
    auto moved = vs;
    for (auto& v : moved) {
      Vector dir{g(rng), g(rng)};
      const double len = norm(dir);
      for (std::size_t c = 0; c < 2; ++c) v[c] += delta * std::uniform_real_distribution<>(0, 1)(rng) * dir[c] / len;
    }
    const double d0 = dist_to_critical(SubdiffDescription::hull(vs));
    const double d1 = dist_to_critical(SubdiffDescription::hull(moved));
    EXPECT_LE(std::abs(d1 - d0), delta * (1.0 + 1e-12) + 1e-15) << "trial " << trial;
  }
}

TEST(DistanceToHull, ZeroForHullPointsPositiveOutside) {
  EXPECT_NEAR(distance_to_hull(kTripodGradients, Vector{0.0, 0.0}), 0.0, 1e-15);
  EXPECT_NEAR(distance_to_hull(kTripodGradients, Vector{3.0, 0.0}), 2.0, 1e-15);
}

// ---------------------------------------------------------------------------

TEST(Selection, MinNormExamples) {
  const SelectionPolicy mn{SelectionKind::min_norm, 0};
  const auto seg = select(mn, SubdiffDescription::hull({{1.0, 1.0}, {1.0, -1.0}}));
  EXPECT_NEAR(seg[0], 1.0, 1e-15);
  EXPECT_NEAR(seg[1], 0.0, 1e-15);
  EXPECT_NEAR(norm(select(mn, SubdiffDescription::hull(kTripodGradients))), 0.0, 1e-15);
}

TEST(Selection, SingletonForEveryPolicy) {
  for (auto kind : {SelectionKind::first_active, SelectionKind::min_norm,
                    SelectionKind::random_vertex, SelectionKind::random_hull}) {
    EXPECT_EQ(select({kind, 42}, SubdiffDescription::single({2.0, 0.0})), (Vector{2.0, 0.0}));
  }
}

TEST(Selection, FirstActiveTakesFirstVertex) {
  EXPECT_EQ(select({}, SubdiffDescription::hull(kTripodGradients)), kTripodGradients[0]);
}

TEST(Selection, PolicyNamesRoundTrip) {
  for (auto kind : {SelectionKind::first_active, SelectionKind::min_norm,
                    SelectionKind::random_vertex, SelectionKind::random_hull})
    EXPECT_EQ(parse_selection_kind(to_string(kind)), kind);
  EXPECT_THROW(parse_selection_kind("steepest"), InputError);
}

TEST(Selection, OutputsLieInTheHull) {
  std::mt19937_64 rng(9);
  for (auto kind : {SelectionKind::first_active, SelectionKind::min_norm,
                    SelectionKind::random_vertex, SelectionKind::random_hull}) {
    Selector s({kind, 1234});
    for (int trial = 0; trial < 300; ++trial) {
      const auto vs = random_vertices(rng, 1 + trial % 8, 2 + trial % 2);
      const Vector v = s.select(SubdiffDescription::hull(vs));
      EXPECT_LE(distance_to_hull(vs, v), 1e-12 * (1.0 + norm(v)))
          << to_string(kind) << " trial " << trial;
    }
  }
}

TEST(Selection, RandomKindsAreReproducibleFromSeed) {
  std::mt19937_64 rng(21);
  std::vector<SubdiffDescription> sds;
  for (int k = 0; k < 50; ++k) sds.push_back(SubdiffDescription::hull(random_vertices(rng, 2 + k % 4, 2)));
  for (auto kind : {SelectionKind::random_vertex, SelectionKind::random_hull}) {
    Selector a({kind, 77}), b({kind, 77}), c({kind, 78});
    bool any_difference = false;
    for (const auto& sd : sds) {
      const Vector va = a.select(sd);
      EXPECT_EQ(va, b.select(sd));
      any_difference = any_difference || va != c.select(sd);
    }
    EXPECT_TRUE(any_difference) << to_string(kind);
  }
}

TEST(Selection, RandomHullCoversTheInterior) {
  // Dirichlet(1,1,1) weights: the mean selection is the centroid.
  Selector s({SelectionKind::random_hull, 3});
  const auto sd = SubdiffDescription::hull(kTripodGradients);
  Vector mean(2, 0.0);
  const int m = 20000;
  for (int k = 0; k < m; ++k) {
    const Vector v = s.select(sd);
    mean[0] += v[0] / m;
    mean[1] += v[1] / m;
  }
  EXPECT_NEAR(mean[0], 0.0, 0.03);
  EXPECT_NEAR(mean[1], 0.0, 0.03);
}
