#include <gtest/gtest.h>

#include <random>

#include "subgrad/diagnostics.hpp"
#include "support.hpp"

using namespace subgrad;
using testing_support::cached_run;
using testing_support::make_trajectory;
using testing_support::random_trajectory;

namespace {

const Vector kOrigin{0.0, 0.0};

Trajectory constant_trajectory(const Vector& x, std::size_t n) {
  std::vector<Vector> xs(n + 1, x), vs(n + 1, Vector(x.size(), 0.5));
  std::vector<double> eps;
  for (std::size_t i = 0; i <= n; ++i) eps.push_back(1.0 / static_cast<double>(i + 1));
  return make_trajectory(xs, vs, eps);
}

Trajectory abs_run(double c, std::size_t steps) {
  return run(*make_abs_1d(), Vector{1.0}, StepSchedule{c, 1.0, 1}, {}, steps);
}

// Essacc protocol used for the reference runs.
EssAccReport reference_essacc(const Trajectory& tr, const FunctionOracle* f) {
  return essacc_estimate(tr, GridSpec{Box::cube(2, -2.0, 2.0), 64},
                         geometric_checkpoints(tr.last_index(), 4, 10000), 0.01, f);
}

double median_radius(const Trajectory& tr) {
  std::vector<double> r;
  for (std::size_t i = 0; i < tr.size(); ++i) r.push_back(norm(tr.point(i)));
  std::nth_element(r.begin(), r.begin() + r.size() / 2, r.end());
  return r[r.size() / 2];
}

}  // namespace

TEST(Checkpoints, GeometricSequence) {
  EXPECT_EQ(geometric_checkpoints(100), (std::vector<std::size_t>{1, 2, 3, 6, 10, 18, 32, 56, 100}));
  EXPECT_EQ(geometric_checkpoints(150), (std::vector<std::size_t>{1, 2, 3, 6, 10, 18, 32, 56, 100, 150}));
  EXPECT_EQ(geometric_checkpoints(1000000, 4, 10000).front(), 10000u);
  EXPECT_EQ(geometric_checkpoints(1000000, 4, 10000).size(), 9u);
  EXPECT_EQ(geometric_checkpoints(1, 1), (std::vector<std::size_t>{1}));
  EXPECT_THROW(geometric_checkpoints(10, 0), InputError);
  EXPECT_THROW(geometric_checkpoints(10, 4, 11), InputError);
  const auto tr = constant_trajectory(kOrigin, 10);
  EXPECT_THROW(validate_checkpoints({3, 3}, tr, "t"), InputError);
  EXPECT_THROW(validate_checkpoints({3, 11}, tr, "t"), InputError);
  EXPECT_THROW(validate_checkpoints({}, tr, "t"), InputError);
}

TEST(Cutoff, ShapeAndValidation) {
  const Cutoff psi{kOrigin, 0.05, 0.1};
  EXPECT_EQ(psi(Vector{0.0, 0.05}), 1.0);
  EXPECT_EQ(psi(Vector{0.1, 0.0}), 0.0);
  EXPECT_NEAR(psi(Vector{0.075, 0.0}), 0.5, 1e-12);
  EXPECT_EQ(psi(Vector{3.0, 0.0}), 0.0);
  EXPECT_THROW((Cutoff{kOrigin, 0.1, 0.1}).validate(), InputError);
  EXPECT_THROW((Cutoff{kOrigin, 0.0, 0.1}).validate(), InputError);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  double prev_r = 0.0, prev_v = 1.0;
  std::vector<std::pair<double, double>> samples;
  for (int k = 0; k < 1000; ++k) {
    const Vector x{u(rng), u(rng)};
    const double v = psi(x);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    samples.emplace_back(norm(x), v);
  }
  std::sort(samples.begin(), samples.end());
  for (const auto& [r, v] : samples) {
    // Nonincreasing and 1/(delta-eta)-Lipschitz in the radius.
    EXPECT_LE(v, prev_v + 1e-15);
    EXPECT_LE(prev_v - v, (r - prev_r) / 0.05 + 1e-12);
    prev_r = r;
    prev_v = v;
  }
}

// ---------------------------------------------------------------------------

TEST(Compensation, HugeCutoffTelescopes) {
  const auto& tr = cached_run("tripod", 100000);
  const auto pts = compensation_ratio(tr, Cutoff{kOrigin, 100.0, 200.0}, geometric_checkpoints(100000));
  for (const auto& p : pts) {
    const Vector x0(tr.point(0).begin(), tr.point(0).end());
    const Vector next = p.n + 1 < tr.size() ? Vector(tr.point(p.n + 1).begin(), tr.point(p.n + 1).end())
                                            : tr.next_point();
    const double expected = distance(x0, next) / tr.time(p.n);
    ASSERT_TRUE(p.ratio);
    EXPECT_NEAR(*p.ratio, expected, 1e-10 * (1.0 + expected)) << p.n;
    EXPECT_NEAR(p.mass, 1.0, 1e-12);
  }
}

TEST(Compensation, EmptySupport) {
  const auto tr = constant_trajectory({5.0, 5.0}, 100);
  const auto pts = compensation_ratio(tr, Cutoff{kOrigin, 0.05, 0.1}, {10, 100});
  for (const auto& p : pts) {
    EXPECT_FALSE(p.ratio);
    EXPECT_EQ(p.mass, 0.0);
  }
}

TEST(Compensation, TripodLocalCompensation) {
  const auto& tr = cached_run("tripod");
  const auto pts = compensation_ratio(tr, Cutoff{kOrigin, 0.05, 0.1}, {1000000});
  ASSERT_TRUE(pts.back().ratio);
  EXPECT_LE(*pts.back().ratio, 0.1);
  EXPECT_GE(pts.back().mass, 0.5);
}

TEST(Compensation, MatchesDirectSums) {
  std::mt19937_64 rng(2);
  const auto tr = random_trajectory(rng, 500);
  const double r = median_radius(tr);
  const Cutoff psi{kOrigin, 0.5 * r, 1.5 * r};
  const auto pts = compensation_ratio(tr, psi, {17, 250, 500});
  for (const auto& p : pts) {
    double nx = 0, ny = 0, den = 0;
    for (std::size_t i = 0; i <= p.n; ++i) {
      const double w = psi(tr.point(i));
      nx += tr.step(i) * w * tr.velocity(i)[0];
      ny += tr.step(i) * w * tr.velocity(i)[1];
      den += tr.step(i) * w;
    }
    if (den == 0.0) {
      EXPECT_FALSE(p.ratio);
      continue;
    }
    ASSERT_TRUE(p.ratio);
    EXPECT_NEAR(*p.ratio, std::hypot(nx, ny) / den, 1e-12);
    EXPECT_NEAR(p.mass, den / tr.time(p.n), 1e-12);
  }
}

// ---------------------------------------------------------------------------

TEST(Intervals, SequenceInsideSmallBall) {
  std::vector<Vector> xs, vs;
  std::vector<double> eps;
  for (int i = 0; i <= 50; ++i) {
    xs.push_back({0.01 * std::cos(i), 0.01 * std::sin(i)});
    eps.push_back(1.0 / 64.0);
  }
  // v_i chosen so that x_{i+1} = x_i - eps_i v_i.
  for (int i = 0; i <= 50; ++i) {
    const Vector next{0.01 * std::cos(i + 1), 0.01 * std::sin(i + 1)};
    vs.push_back(scaled(xs[i] - next, 64.0));
  }
  const auto tr = make_trajectory(xs, vs, eps);
  const auto dec = interval_decomposition(tr, kOrigin, 0.05, 0.1);
  ASSERT_EQ(dec.intervals.size(), 1u);
  EXPECT_EQ(dec.intervals[0].first, 0u);
  EXPECT_EQ(dec.intervals[0].last, 50u);
  EXPECT_TRUE(dec.intervals[0].open_ended);
  ASSERT_TRUE(dec.statistic);
  const Vector x0 = xs.front();
  EXPECT_NEAR(*dec.statistic, distance(x0, tr.next_point()) / tr.time(50), 1e-12);
}

TEST(Intervals, NeverEnteringGivesNone) {
  const auto dec = interval_decomposition(constant_trajectory({1.0, 1.0}, 20), kOrigin, 0.05, 0.1);
  EXPECT_TRUE(dec.intervals.empty());
  EXPECT_FALSE(dec.statistic);
  EXPECT_THROW(interval_decomposition(constant_trajectory({1.0, 1.0}, 20), kOrigin, 0.1, 0.1),
               InputError);
}

TEST(Intervals, AbsValleyIntervalIsUnbounded) {
  // The run settles in B_delta(0) early, so the decomposition is a single
  // interval that is still open at N and whose time grows without bound.
  const auto& tr = cached_run("absvalley");
  const auto dec = interval_decomposition(tr, kOrigin, 0.05, 0.2);
  ASSERT_FALSE(dec.intervals.empty());
  const auto& last = dec.intervals.back();
  EXPECT_TRUE(last.open_ended);
  EXPECT_EQ(last.last, tr.last_index());
  const auto early = interval_decomposition(cached_run("absvalley", 10000), kOrigin, 0.05, 0.2);
  EXPECT_GE(last.time, 3.0 * early.intervals.back().time);
}

TEST(Intervals, AgreeWithNaiveScan) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const auto tr = random_trajectory(rng, 200 + 100 * (trial % 20));
    const double r = median_radius(tr);
    const double eta = 0.5 * r, delta = 1.5 * r;
    const auto dec = interval_decomposition(tr, kOrigin, eta, delta);
    const auto ref = testing_support::naive_intervals(tr, kOrigin, eta, delta);
    ASSERT_EQ(dec.intervals.size(), ref.size()) << trial;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      EXPECT_EQ(dec.intervals[k].first, ref[k].first);
      EXPECT_EQ(dec.intervals[k].last, ref[k].last);
      EXPECT_EQ(dec.intervals[k].time, ref[k].time);  // dyadic steps: exact
    }
  }
}

TEST(Intervals, DisjointSortedAndInsideTheBall) {
  std::mt19937_64 rng(5);
  const auto tr = random_trajectory(rng, 5000);
  const double r = median_radius(tr);
  const auto dec = interval_decomposition(tr, kOrigin, 0.5 * r, 1.2 * r);
  for (std::size_t k = 0; k < dec.intervals.size(); ++k) {
    const auto& iv = dec.intervals[k];
    EXPECT_LT(iv.first, iv.last);
    if (k > 0) {
      EXPECT_GT(iv.first, dec.intervals[k - 1].last + 1);
    }
    bool touched = false;
    for (std::size_t i = iv.first; i <= iv.last; ++i) {
      EXPECT_LE(norm(tr.point(i)), 1.2 * r);
      touched = touched || norm(tr.point(i)) <= 0.5 * r;
    }
    EXPECT_TRUE(touched);
  }
}

// ---------------------------------------------------------------------------

TEST(Separation, SinglePair) {
  const auto tr = make_trajectory({{0.0, 0.0}, {1.0, 0.0}, {5.0, 5.0}}, {{0, 0}, {0, 0}, {0, 0}},
                                  {0.5, 0.25, 0.125});
  const Ball bx{{0.0, 0.0}, 0.1}, by{{1.0, 0.0}, 0.1};
  EXPECT_EQ(separation_time(tr, bx, by, 0), 0.75);
  EXPECT_TRUE(std::isinf(separation_time(tr, bx, by, 1)));
  EXPECT_TRUE(std::isinf(separation_time(tr, bx, Ball{{3.0, 3.0}, 0.1}, 0)));
}

TEST(Separation, OverlappingBallsAreRejected) {
  const auto tr = constant_trajectory(kOrigin, 3);
  EXPECT_THROW(separation_time(tr, Ball{kOrigin, 0.1}, Ball{{0.15, 0.0}, 0.1}, 0), InputError);
  EXPECT_THROW(separation_time(tr, Ball{kOrigin, 0.1}, Ball{{0.2, 0.0}, 0.1}, 0), InputError);
  EXPECT_THROW(separation_time(tr, Ball{kOrigin, 0.1}, Ball{{1.0, 0.0}, 0.1}, 4), InputError);
}

TEST(Separation, AgreesWithNaiveScanAndIsMonotone) {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 30; ++trial) {
    const auto tr = random_trajectory(rng, 300 + 50 * trial);
    const double r = median_radius(tr);
    const Ball bx{{r, 0.0}, 0.4 * r}, by{{-r, 0.0}, 0.4 * r};
    const auto series = separation_series(tr, bx, by);
    for (std::size_t j = 0; j < tr.size(); j += 37)
      ASSERT_EQ(series[j], testing_support::naive_separation(tr, bx, by, j)) << trial << " " << j;
    for (std::size_t j = 1; j < series.size(); ++j) ASSERT_GE(series[j], series[j - 1]);
    // Bigger balls: shorter times.
    const auto wide = separation_series(tr, Ball{bx.center, 0.9 * r}, Ball{by.center, 0.9 * r});
    for (std::size_t j = 0; j < series.size(); ++j) ASSERT_LE(wide[j], series[j]);
  }
}

TEST(Separation, ConvergentRunSeparationGrows) {
  // Two phases: the run of |x| crosses between +-0.5 early, then settles at 0.
  const auto tr = abs_run(1.0, 20000);
  const auto series = separation_series(tr, Ball{{0.5}, 0.2}, Ball{{-0.5}, 0.2});
  EXPECT_TRUE(std::isinf(series.back()));
  for (std::size_t j = 1; j < series.size(); ++j) ASSERT_GE(series[j], series[j - 1]);
}

// ---------------------------------------------------------------------------

TEST(Perpendicularity, AbsValleyTangentIsExact) {
  const auto& tr = cached_run("absvalley");
  const Vector center{0.0, tr.point(tr.size() - 1)[1]};
  const auto rep = perpendicularity(tr, center, 0.1, {{0.0, 1.0}}, 0.5);
  ASSERT_FALSE(rep.empty());
  EXPECT_EQ(rep.max_abs, 0.0);
  EXPECT_EQ(rep.mean_abs, 0.0);
}

TEST(Perpendicularity, BowlGradientVanishes) {
  const auto f = make_quadratic_bowl();
  const auto tr = run(*f, Vector{0.8, -0.6}, StepSchedule{0.1, 0.5, 1}, {}, 100000);
  const double s = 1.0 / std::sqrt(2.0);
  const auto rep = perpendicularity(tr, kOrigin, 0.1, {{1.0, 0.0}, {0.0, 1.0}, {s, s}}, 0.5, 0.0);
  ASSERT_FALSE(rep.empty());
  EXPECT_LE(rep.max_abs, 1e-3);
  for (std::size_t k = tr.size() / 2; k < tr.size(); ++k)
    EXPECT_LE(rep.max_abs, norm(tr.velocity(tr.size() / 2)) + 1e-15);
}

TEST(Perpendicularity, TripodOriginStratum) {
  const auto& tr = cached_run("tripod");
  const auto* s = make_tripod()->stratum_containing(kOrigin);
  ASSERT_NE(s, nullptr);
  const auto rep = perpendicularity(tr, kOrigin, 0.1, s->tangents, 0.5);
  EXPECT_EQ(rep.basis_dimension, 0u);
  EXPECT_GT(rep.samples, 0u);
  EXPECT_LE(rep.max_abs, 0.1);
  EXPECT_GE(rep.velocity_threshold, 0.5);
}

TEST(Perpendicularity, ErrorsAndEmptySample) {
  const auto tr = constant_trajectory(kOrigin, 10);
  EXPECT_TRUE(perpendicularity(tr, Vector{5.0, 5.0}, 0.1, {{1.0, 0.0}}, 0.5).empty());
  EXPECT_THROW(perpendicularity(tr, kOrigin, 0.1, {{2.0, 0.0}}, 0.5), InputError);
  EXPECT_THROW(perpendicularity(tr, kOrigin, 0.1, {{1.0, 0.0}}, 0.0), InputError);
  EXPECT_THROW(perpendicularity(tr, kOrigin, 0.0, {{1.0, 0.0}}, 0.5), InputError);
}

// ---------------------------------------------------------------------------

TEST(Values, ConstantSequence) {
  const auto tr = constant_trajectory(kOrigin, 10);
  EXPECT_EQ(value_convergence(tr, 5).tail_oscillation, 0.0);
  EXPECT_THROW(value_convergence(tr, 11), InputError);
  EXPECT_THROW(value_convergence(tr, 0), InputError);
}

TEST(Values, TripodTail) {
  const auto& tr = cached_run("tripod_harmonic");
  EXPECT_LE(value_convergence(tr, 10000).tail_oscillation, 0.01);
}

TEST(Values, AbsoluteValueLimit) {
  const auto v = value_convergence(abs_run(1.0, 100000), 1000);
  EXPECT_LE(v.f_limit_estimate, 0.01);
  EXPECT_GE(v.f_limit_estimate, 0.0);
}

TEST(Values, ThinnedRecordUsesStoredRows) {
  RunOptions opt;
  opt.thin = 10;
  const auto thin = run(*make_tripod(), Vector{0.3, -0.7}, StepSchedule{0.1, 0.5, 1}, {}, 10000, opt);
  const auto dense = run(*make_tripod(), Vector{0.3, -0.7}, StepSchedule{0.1, 0.5, 1}, {}, 10000);
  const auto a = value_convergence(thin, 1000);
  const auto b = value_convergence(dense, 1000);
  EXPECT_LE(a.tail_oscillation, b.tail_oscillation);
  EXPECT_NEAR(a.f_limit_estimate, b.f_limit_estimate, b.tail_oscillation);
}

// ---------------------------------------------------------------------------

TEST(Regions, SequenceInOneRegion) {
  const auto f = make_tripod();
  const auto tr = constant_trajectory({-1.0, 0.0}, 10);
  const auto pts = region_occupation(tr, polyhedral_regions(*f), {10});
  EXPECT_NEAR(pts[0].fractions[0], 1.0, 1e-15);
  EXPECT_EQ(pts[0].fractions[1], 0.0);
  EXPECT_EQ(pts[0].fractions[2], 0.0);
  EXPECT_DOUBLE_EQ(pts[0].residual, 2.0);
}

TEST(Regions, TripodBalances) {
  const auto f = make_tripod();
  const auto pts = region_occupation(cached_run("tripod"), polyhedral_regions(*f), {1000000});
  for (double l : pts.back().fractions) EXPECT_NEAR(l, 1.0 / 3.0, 0.05);
  EXPECT_LE(pts.back().residual, 0.05);
}

TEST(Regions, AbsoluteValueSplitsEvenly) {
  const auto f = make_abs_1d();
  const auto tr = abs_run(1.0, 100000);
  const auto pts = region_occupation(tr, polyhedral_regions(*f), geometric_checkpoints(100000));
  EXPECT_NEAR(pts.back().fractions[0], 0.5, 0.05);
  EXPECT_NEAR(pts.back().fractions[1], 0.5, 0.05);
  // The imbalance is the first step eps_0 = 1 spent at x_0 = 1; after that
  // the iterates alternate sides, so residual * t_N stays bounded.
  for (const auto& p : pts) EXPECT_LE(p.residual * tr.time(p.n), 1.5) << p.n;
  EXPECT_LT(pts.back().residual, pts[pts.size() / 2].residual);
}

TEST(Regions, FractionsPartitionTime) {
  const auto f = make_tripod();
  const auto& tr = cached_run("tripod_harmonic", 100000);
  for (const auto& p : region_occupation(tr, polyhedral_regions(*f), geometric_checkpoints(100000))) {
    double s = 0.0;
    for (double l : p.fractions) s += l;
    EXPECT_NEAR(s, 1.0, 1e-12) << p.n;
  }
}

// ---------------------------------------------------------------------------

TEST(EssAcc, ConstantSequence) {
  const auto tr = constant_trajectory({0.3, 0.3}, 1000);
  const auto rep = essacc_estimate(tr, GridSpec{Box::cube(2, -1.0, 1.0), 8}, geometric_checkpoints(1000), 0.99);
  ASSERT_EQ(rep.cells.size(), 1u);
  for (double fr : rep.cells[0].fractions) EXPECT_DOUBLE_EQ(fr, 1.0);
  EXPECT_TRUE(rep.cells[0].flagged);
}

TEST(EssAcc, AbsoluteValueCentralCell) {
  const auto tr = abs_run(1.0, 100000);
  // Odd resolution: the central cell [-0.53, 0.53] is centered on the kink.
  const GridSpec grid{Box::cube(1, -10.0, 10.0), 19};
  const auto rep = essacc_estimate(tr, grid, geometric_checkpoints(100000), 0.01);
  const auto zero = *grid.cell_of(Vector{0.0});
  const auto it = std::find_if(rep.cells.begin(), rep.cells.end(), [&](const auto& c) { return c.cell == zero; });
  ASSERT_NE(it, rep.cells.end());
  EXPECT_GE(it->estimate, 0.9);
  EXPECT_TRUE(it->flagged);
}

TEST(EssAcc, TripodFlagsOnlyTheOrigin) {
  const auto f = make_tripod();
  const auto rep = reference_essacc(cached_run("tripod"), f.get());
  ASSERT_FALSE(rep.flagged().empty());
  const double diag = rep.grid.diagonal();
  bool has_origin_cell = false;
  for (const auto* c : rep.flagged()) {
    EXPECT_LE(norm(c->center), diag + 1e-12) << c->cell;
    has_origin_cell = has_origin_cell || norm(c->center) <= 0.5 * diag + 1e-12;
  }
  EXPECT_TRUE(has_origin_cell);
  EXPECT_EQ(dist_to_critical(subdifferential(*f, kOrigin)), 0.0);
}

TEST(EssAcc, FractionsSumToOne) {
  for (const std::string name : {"tripod_harmonic", "tripod", "absvalley", "nsbanana"}) {
    const auto& tr = cached_run(name, 100000);
    const auto rep = essacc_estimate(tr, GridSpec{Box::cube(2, -1.0, 1.0), 16},
                                     geometric_checkpoints(100000), 0.01);
    for (std::size_t k = 0; k < rep.checkpoints.size(); ++k) {
      double s = rep.overflow_fractions[k];
      for (const auto& c : rep.cells) {
        ASSERT_GE(c.fractions[k], 0.0);
        ASSERT_LE(c.fractions[k], 1.0);
        s += c.fractions[k];
      }
      EXPECT_NEAR(s, 1.0, 1e-12) << name << " " << k;
    }
  }
}

TEST(EssAcc, FlaggedCellsNearAccumulationCells) {
  // On nsbanana the valley transit still holds more than tau of the time at
  // the tail checkpoints although the run has left it; the acceptance suite
  // reports that case.
  for (const std::string name : {"tripod", "absvalley"}) {
    const auto rep = reference_essacc(cached_run(name), nullptr);
    const auto visited = rep.visited_in_tail();
    for (const auto* c : rep.flagged()) {
      bool near = false;
      for (const auto* v : visited)
        near = near || distance(c->center, v->center) <= 2.0 * rep.grid.diagonal();
      EXPECT_TRUE(near) << name << " cell " << c->cell;
    }
  }
}

TEST(EssAcc, FlaggedCellsAreCritical) {
  // nsbanana is covered by the acceptance suite, where it is reported as an
  // unmet criterion at this horizon.
  for (const std::string name : {"tripod", "absvalley"}) {
    const auto f = make_builtin(name);
    const auto rep = reference_essacc(cached_run(name), f.get());
    ASSERT_FALSE(rep.flagged().empty()) << name;
    for (const auto* c : rep.flagged()) {
      ASSERT_TRUE(c->dist_mean);
      EXPECT_LE(*c->dist_mean, 0.1) << name << " cell " << c->cell;
    }
  }
}

TEST(EssAcc, InputValidation) {
  const auto tr = constant_trajectory(kOrigin, 10);
  const GridSpec grid{Box::cube(2, -1.0, 1.0), 4};
  EXPECT_THROW(essacc_estimate(tr, grid, {5}, 0.0), InputError);
  EXPECT_THROW(essacc_estimate(tr, grid, {5}, 1.0), InputError);
  EXPECT_THROW(essacc_estimate(tr, grid, {5, 4}, 0.5), InputError);
  EXPECT_THROW(essacc_estimate(tr, GridSpec{Box::cube(1, -1.0, 1.0), 4}, {5}, 0.5), InputError);
}

// ---------------------------------------------------------------------------

TEST(Series, DefectMatchesDirectComputationAtEachCheckpoint) {
  const auto& tr = cached_run("tripod", 100000);
  const auto cps = geometric_checkpoints(100000, 2, 100);
  const Box box = Box::cube(2, -1.0, 1.0);
  const auto series = defect_series(tr, 2, cps, box);
  ASSERT_EQ(series.size(), cps.size());
  for (std::size_t k = 0; k < cps.size(); ++k)
    EXPECT_NEAR(series[k].defect, closedness_defect(phase_measure(tr, 0, cps[k]), 2, box).defect, 1e-12);
}

TEST(Series, CentroidMatchesDirectComputation) {
  const auto& tr = cached_run("absvalley", 100000);
  const auto cps = geometric_checkpoints(100000, 2, 100);
  const GridSpec grid{Box::cube(2, -2.0, 2.0), 63};
  const auto series = centroid_series(tr, grid, cps);
  for (std::size_t k = 0; k < cps.size(); ++k) {
    const auto g = centroid_field(phase_measure(tr, 0, cps[k]), grid.box, grid.resolution);
    EXPECT_NEAR(series[k].mean_centroid_norm, g.mean_centroid_norm(), 1e-12);
    EXPECT_EQ(series[k].cells, g.cells.size());
  }
}
