#ifndef SUBGRAD_TESTS_SUPPORT_HPP
#define SUBGRAD_TESTS_SUPPORT_HPP

// Shared fixtures and independent reference implementations for the tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "subgrad/diagnostics.hpp"
#include "subgrad/dynamics.hpp"
#include "subgrad/funcs.hpp"

namespace testing_support {

using subgrad::Vector;

/// Trajectory from explicit rows; t_i is the running sum of the steps.
inline subgrad::Trajectory make_trajectory(const std::vector<Vector>& xs,
                                           const std::vector<Vector>& vs,
                                           const std::vector<double>& eps) {
  subgrad::Trajectory tr(xs.front().size());
  double t = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    t += eps[i];
    tr.append(i, xs[i], vs[i], eps[i], t, 0.0);
  }
  return tr;
}

/// Random planar trajectory wandering around the origin with dyadic steps,
/// so that every partial sum of steps is exact in double precision.
inline subgrad::Trajectory random_trajectory(std::mt19937_64& rng, std::size_t n_steps) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> k(1, 64);
  std::uniform_real_distribution<double> scale(0.02, 0.3);
  std::vector<Vector> xs, vs;
  std::vector<double> eps;
  Vector x{u(rng), u(rng)};
  const double jump = scale(rng);
  for (std::size_t i = 0; i <= n_steps; ++i) {
    xs.push_back(x);
    vs.push_back({u(rng), u(rng)});
    eps.push_back(k(rng) / 1024.0);
    // Mean-reverting walk: stays near the origin but leaves it regularly.
    x[0] = 0.9 * x[0] + jump * u(rng);
    x[1] = 0.9 * x[1] + jump * u(rng);
  }
  return make_trajectory(xs, vs, eps);
}

// ---------------------------------------------------------------------------
// Minimum-norm point by enumeration of supporting faces.

/// Solves A y = b in place by Gaussian elimination with partial pivoting.
/// Returns false for (numerically) singular systems.
inline bool solve_dense(std::vector<std::vector<double>> a, std::vector<double> b,
                        std::vector<double>& y) {
  const std::size_t m = b.size();
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < m; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-13) return false;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < m; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < m; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  y.assign(m, 0.0);
  for (std::size_t r = m; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < m; ++k) s -= a[r][k] * y[k];
    y[r] = s / a[r][r];
  }
  return true;
}

/// dist(0, conv(vs)) as the least norm over all faces whose affine
/// min-norm point has nonnegative barycentric weights.
inline double brute_min_norm(const std::vector<Vector>& vs) {
  const std::size_t k = vs.size();
  const std::size_t n = vs.front().size();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < k; ++j)
      if (mask >> j & 1u) idx.push_back(j);
    if (idx.size() > n + 1) continue;
    const std::size_t m = idx.size();
    // KKT system of min ||sum w_j v_j||^2 subject to sum w_j = 1.
    std::vector<std::vector<double>> a(m + 1, std::vector<double>(m + 1, 0.0));
    std::vector<double> b(m + 1, 0.0), y;
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) a[r][c] = subgrad::dot(vs[idx[r]], vs[idx[c]]);
      a[r][m] = 1.0;
      a[m][r] = 1.0;
    }
    b[m] = 1.0;
    if (!solve_dense(a, b, y)) continue;
    if (*std::min_element(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(m)) < -1e-12)
      continue;
    Vector p(n, 0.0);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) p[c] += y[r] * vs[idx[r]][c];
    best = std::min(best, subgrad::norm(p));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Naive references for the index-set diagnostics.

struct NaiveInterval {
  std::size_t first, last;
  double time;
  bool operator==(const NaiveInterval&) const = default;
};

/// Every [a, b] with a < b, all points in B_delta and one in B_eta, that is
/// not strictly contained in another such interval. A valid interval is
/// contained in a larger one exactly when it extends by one index on
/// either side, which keeps the scan quadratic.
inline std::vector<NaiveInterval> naive_intervals(const subgrad::Trajectory& tr,
                                                  const Vector& center, double eta,
                                                  double delta) {
  const std::size_t m = tr.size();
  auto in_delta = [&](std::size_t i) { return subgrad::distance(tr.point(i), center) <= delta; };
  auto in_eta = [&](std::size_t i) { return subgrad::distance(tr.point(i), center) <= eta; };
  std::vector<NaiveInterval> out;
  for (std::size_t a = 0; a < m; ++a) {
    bool touched = false;
    for (std::size_t b = a; b < m && in_delta(b); ++b) {
      touched = touched || in_eta(b);
      if (b == a || !touched) continue;
      if (a > 0 && in_delta(a - 1)) continue;
      if (b + 1 < m && in_delta(b + 1)) continue;
      double t = 0.0;
      for (std::size_t i = a; i <= b; ++i) t += tr.step(i);
      out.push_back({a, b, t});
    }
  }
  return out;
}

/// T_j by direct enumeration of all pairs i < l.
inline double naive_separation(const subgrad::Trajectory& tr, const subgrad::Ball& bx,
                               const subgrad::Ball& by, std::size_t j) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = j; i < tr.size(); ++i) {
    if (!bx.contains(tr.point(i))) continue;
    double s = tr.step(i);
    for (std::size_t l = i + 1; l < tr.size(); ++l) {
      s += tr.step(l);
      if (s >= best) break;  // steps are positive
      if (by.contains(tr.point(l))) best = std::min(best, s);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Chain rule along sampled segments.

struct ChainRuleStats {
  int checked = 0;
  int failed = 0;
  int unexplained = 0;
};

// Central difference of f along a + t(b - a) against v . (b - a) at t where
// the oracle reports a single active gradient.
inline ChainRuleStats chain_rule_suite(const subgrad::FunctionOracle& f, std::uint64_t seed,
                                       double box) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-box, box), ut(0.0, 1.0);
  const double h = 1e-6;
  ChainRuleStats st;
  const std::size_t n = f.dimension();
  for (int seg = 0; seg < 100; ++seg) {
    Vector a(n), b(n);
    for (std::size_t c = 0; c < n; ++c) {
      a[c] = u(rng);
      b[c] = u(rng);
    }
    const Vector d = subgrad::operator-(b, a);
    for (int k = 0; k < 100; ++k) {
      const double t = ut(rng);
      Vector x(n), xp(n), xm(n);
      for (std::size_t c = 0; c < n; ++c) {
        x[c] = a[c] + t * d[c];
        xp[c] = a[c] + (t + h) * d[c];
        xm[c] = a[c] + (t - h) * d[c];
      }
      const auto sd = subgrad::subdifferential(f, x);
      if (sd.vertices.size() != 1) continue;
      ++st.checked;
      const double fd = (f.value(xp) - f.value(xm)) / (2.0 * h);
      if (std::abs(fd - subgrad::dot(sd.vertices[0], d)) > 1e-6 * (1.0 + std::abs(f.value(x)))) {
        ++st.failed;
        // A kink inside the difference stencil explains the miss.
        if (f.subdifferential_within(x, 2.0 * h * subgrad::norm(d)).vertices.size() == 1)
          ++st.unexplained;
      }
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Long reference runs shared between tests of one binary.

struct ReferenceRun {
  std::string name;
  subgrad::OraclePtr oracle;
  Vector x0;
  subgrad::StepSchedule schedule;
};

inline ReferenceRun reference(const std::string& name) {
  using namespace subgrad;
  if (name == "tripod_harmonic") return {name, make_tripod(), {0.3, -0.7}, {0.1, 1.0, 1}};
  if (name == "tripod") return {name, make_tripod(), {0.3, -0.7}, {0.1, 0.5, 1}};
  if (name == "absvalley") return {name, make_absvalley(), {1.0, 0.0}, {0.1, 0.5, 1}};
  if (name == "nsbanana") return {name, make_nsbanana(), {0.5, 0.25}, {0.01, 0.5, 100}};
  throw std::invalid_argument("unknown reference run " + name);
}

/// 10^6-step first-active run of a reference configuration, computed once.
inline const subgrad::Trajectory& cached_run(const std::string& name,
                                             std::size_t steps = 1000000) {
  static std::mutex mu;
  static std::map<std::pair<std::string, std::size_t>, std::unique_ptr<subgrad::Trajectory>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{name, steps}];
  if (!slot) {
    const auto r = reference(name);
    slot = std::make_unique<subgrad::Trajectory>(
        subgrad::run(*r.oracle, r.x0, r.schedule, subgrad::SelectionPolicy{}, steps));
  }
  return *slot;
}

}  // namespace testing_support

#endif  // SUBGRAD_TESTS_SUPPORT_HPP
