#ifndef SUBGRAD_DIAGNOSTICS_HPP
#define SUBGRAD_DIAGNOSTICS_HPP

// Finite-N statistics for the asymptotic behavior of subgradient sequences:
// occupation of space (essential accumulation), local and global
// compensation of the steps, excursion intervals around a point, transit
// times between balls, orthogonality of oscillations to strata, and
// convergence of the values.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "subgrad/dynamics.hpp"
#include "subgrad/funcs.hpp"
#include "subgrad/measures.hpp"

namespace subgrad {

inline constexpr double kDefaultEssAccThreshold = 0.01;

/// N_k = round(10^(k/per_decade)) for N_k in [first, last], followed by
/// `last` itself if the sequence does not already end there.
inline std::vector<std::size_t> geometric_checkpoints(std::size_t last, int per_decade = 4,
                                                     std::size_t first = 1) {
  if (per_decade < 1) throw InputError("checkpoints: per_decade must be >= 1");
  if (first < 1 || first > last) throw InputError("checkpoints: need 1 <= first <= last");
  std::vector<std::size_t> out;
  for (int k = 0;; ++k) {
    const double v = std::round(std::pow(10.0, static_cast<double>(k) / per_decade));
    if (v > static_cast<double>(last)) break;
    const auto nk = static_cast<std::size_t>(v);
    if (nk >= first && (out.empty() || out.back() != nk)) out.push_back(nk);
  }
  if (out.empty() || out.back() != last) out.push_back(last);
  return out;
}

inline void validate_checkpoints(const std::vector<std::size_t>& cps, const Trajectory& traj,
                                 const char* what) {
  if (cps.empty()) throw InputError(std::string(what) + ": no checkpoints");
  for (std::size_t k = 1; k < cps.size(); ++k)
    if (cps[k] <= cps[k - 1])
      throw InputError(std::string(what) + ": checkpoints must be strictly increasing");
  if (cps.back() > traj.last_index())
    throw InputError(std::string(what) + ": checkpoint beyond trajectory");
}

struct Ball {
  Vector center;
  double radius = 0.0;

  bool contains(ConstView x) const { return distance(x, center) <= radius; }
};

// ---------------------------------------------------------------------------

/// Radial cutoff: 1 on B_eta(center), 0 outside B_delta(center), linear in
/// the distance in between.
struct Cutoff {
  Vector center;
  double eta = 0.0;
  double delta = 0.0;

  void validate() const {
    if (!(eta > 0.0 && delta > eta)) throw InputError("cutoff: need 0 < eta < delta");
  }

  double operator()(ConstView x) const {
    const double r = distance(x, center);
    if (r <= eta) return 1.0;
    if (r >= delta) return 0.0;
    return (delta - r) / (delta - eta);
  }
};

struct CompensationPoint {
  std::size_t n = 0;
  std::optional<double> ratio;  // empty when the cutoff mass is zero
  double mass = 0.0;            // sum eps psi / t_N
};

/// R_N = ||sum_{i<=N} eps_i v_i psi(x_i)|| / sum_{i<=N} eps_i psi(x_i) and
/// M_N = sum eps_i psi(x_i) / t_N at each checkpoint.
inline std::vector<CompensationPoint> compensation_ratio(const Trajectory& traj,
                                                         const Cutoff& psi,
                                                         const std::vector<std::size_t>& cps) {
  traj.require_dense("compensation_ratio");
  psi.validate();
  require_dimension(psi.center, traj.dimension(), "compensation_ratio: center");
  validate_checkpoints(cps, traj, "compensation_ratio");
  std::vector<CompensationPoint> out;
  CompensatedVectorSum num(traj.dimension());
  CompensatedSum den;
  std::size_t next = 0;
  for (std::size_t i = 0; i <= cps.back(); ++i) {
    const double w = psi(traj.point(i));
    if (w > 0.0) {
      num.add_scaled(traj.velocity(i), traj.step(i) * w);
      den.add(traj.step(i) * w);
    }
    if (i == cps[next]) {
      CompensationPoint p{i, std::nullopt, den.value() / traj.time(i)};
      if (den.value() > 0.0) p.ratio = norm(num.value()) / den.value();
      out.push_back(p);
      ++next;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct Interval {
  std::size_t first = 0;
  std::size_t last = 0;
  double time = 0.0;          // sum eps_i over the interval
  Vector sum_step_velocity;   // sum eps_i v_i over the interval
  bool open_ended = false;    // still running at the end of the record

  std::size_t length() const { return last - first + 1; }
  friend bool operator==(const Interval& a, const Interval& b) {
    return a.first == b.first && a.last == b.last;
  }
};

struct IntervalDecomposition {
  Vector center;
  double eta = 0.0;
  double delta = 0.0;
  std::vector<Interval> intervals;
  /// ||sum_{i in A} eps_i v_i|| / sum_{i in A} eps_i; empty when A is empty.
  std::optional<double> statistic;
};

/// Maximal index intervals [a, b], b - a + 1 >= min_length, whose iterates
/// all lie in the closed ball B_delta(center) and at least one of which lies
/// in B_eta(center).
inline IntervalDecomposition interval_decomposition(const Trajectory& traj, ConstView center,
                                                    double eta, double delta,
                                                    std::size_t min_length = 2) {
  traj.require_dense("interval_decomposition");
  require_dimension(center, traj.dimension(), "interval_decomposition: center");
  if (!(eta > 0.0 && delta > eta)) throw InputError("interval_decomposition: need 0 < eta < delta");
  IntervalDecomposition dec{Vector(center.begin(), center.end()), eta, delta, {}, std::nullopt};
  const std::size_t n = traj.dimension();
  CompensatedVectorSum all_num(n);
  CompensatedSum all_den;

  bool inside = false, touched = false;
  std::size_t start = 0;
  CompensatedVectorSum run_num(n);
  CompensatedSum run_den;
  auto close = [&](std::size_t last, bool open) {
    if (touched && last + 1 - start >= min_length) {
      Interval iv{start, last, run_den.value(), run_num.value(), open};
      all_den.add(iv.time);
      all_num.add_scaled(iv.sum_step_velocity, 1.0);
      dec.intervals.push_back(std::move(iv));
    }
    inside = false;
  };
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double r = distance(traj.point(i), center);
    if (r <= delta) {
      if (!inside) {
        inside = true;
        touched = false;
        start = i;
        run_num = CompensatedVectorSum(n);
        run_den = CompensatedSum();
      }
      touched = touched || r <= eta;
      run_num.add_scaled(traj.velocity(i), traj.step(i));
      run_den.add(traj.step(i));
    } else if (inside) {
      close(i - 1, false);
    }
  }
  if (inside) close(traj.size() - 1, true);
  if (all_den.value() > 0.0) dec.statistic = norm(all_num.value()) / all_den.value();
  return dec;
}

// ---------------------------------------------------------------------------

inline void validate_separation_balls(const Ball& bx, const Ball& by, std::size_t n) {
  require_dimension(bx.center, n, "separation: first center");
  require_dimension(by.center, n, "separation: second center");
  if (!(bx.radius > 0.0 && by.radius > 0.0))
    throw InputError("separation: radii must be positive");
  if (!(distance(bx.center, by.center) > bx.radius + by.radius))
    throw InputError("separation: balls overlap");
}

/// T_j for every j in [0, N]: the least sum_{p=i}^{l} eps_p over
/// j <= i < l with x_i in bx and x_l in by; +inf when no such pair exists.
///
/// For fixed i the best l is the first visit to by after i, so a backward
/// sweep gives all T_j in O(N).
inline std::vector<double> separation_series(const Trajectory& traj, const Ball& bx,
                                             const Ball& by) {
  traj.require_dense("separation_time");
  validate_separation_balls(bx, by, traj.dimension());
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t m = traj.size();
  std::vector<double> out(m, inf);
  std::optional<std::size_t> next_y;
  double best = inf;
  for (std::size_t i = m; i-- > 0;) {
    if (bx.contains(traj.point(i)) && next_y) {
      // sum_{p=i}^{l} eps_p = t_l - t_i + eps_i
      best = std::min(best, traj.time(*next_y) - traj.time(i) + traj.step(i));
    }
    out[i] = best;
    if (by.contains(traj.point(i))) next_y = i;
  }
  return out;
}

inline double separation_time(const Trajectory& traj, const Ball& bx, const Ball& by,
                              std::size_t j) {
  if (j > traj.last_index()) throw InputError("separation_time: j beyond trajectory");
  return separation_series(traj, bx, by)[j];
}

// ---------------------------------------------------------------------------

struct PerpendicularityReport {
  std::size_t samples = 0;
  std::size_t basis_dimension = 0;
  double velocity_threshold = 0.0;
  double max_abs = 0.0;
  double mean_abs = 0.0;

  bool empty() const { return samples == 0; }
};

/// Statistics of max_w |w . v_i| over tail iterates near `center` whose
/// subgradient norm is at least `min_velocity_norm` (default: half the
/// median norm of the tail iterates near the center).
inline PerpendicularityReport perpendicularity(const Trajectory& traj, ConstView center,
                                               double radius,
                                               const std::vector<Vector>& tangent_basis,
                                               double tail_fraction,
                                               std::optional<double> min_velocity_norm = {}) {
  traj.require_dense("perpendicularity");
  require_dimension(center, traj.dimension(), "perpendicularity: center");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw InputError("perpendicularity: tail_fraction must lie in (0, 1]");
  if (!(radius > 0.0)) throw InputError("perpendicularity: radius must be positive");
  for (const auto& w : tangent_basis) {
    require_dimension(w, traj.dimension(), "perpendicularity: tangent");
    if (std::abs(norm(w) - 1.0) > 1e-9)
      throw InputError("perpendicularity: tangent vectors must be unit norm");
  }
  const std::size_t m = traj.size();
  const auto start = static_cast<std::size_t>(
      std::floor((1.0 - tail_fraction) * static_cast<double>(m)));
  std::vector<std::size_t> near;
  std::vector<double> norms;
  for (std::size_t k = std::min(start, m - 1); k < m; ++k) {
    if (distance(traj.point(k), center) > radius) continue;
    near.push_back(k);
    norms.push_back(norm(traj.velocity(k)));
  }
  PerpendicularityReport rep;
  rep.basis_dimension = tangent_basis.size();
  if (near.empty()) return rep;
  if (min_velocity_norm) {
    rep.velocity_threshold = *min_velocity_norm;
  } else {
    std::vector<double> sorted = norms;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    rep.velocity_threshold = 0.5 * sorted[sorted.size() / 2];
  }
  double total = 0.0;
  for (std::size_t q = 0; q < near.size(); ++q) {
    if (norms[q] < rep.velocity_threshold) continue;
    double worst = 0.0;
    for (const auto& w : tangent_basis)
      worst = std::max(worst, std::abs(dot(w, traj.velocity(near[q]))));
    rep.max_abs = std::max(rep.max_abs, worst);
    total += worst;
    ++rep.samples;
  }
  if (rep.samples > 0) rep.mean_abs = total / static_cast<double>(rep.samples);
  return rep;
}

// ---------------------------------------------------------------------------

struct ValueConvergence {
  double tail_oscillation = 0.0;
  double f_limit_estimate = 0.0;
};

/// max - min and mean of f(x_i) over the last `window` iterates. On a
/// thinned record only the stored iterates in that window are used.
inline ValueConvergence value_convergence(const Trajectory& traj, std::size_t window) {
  if (traj.empty()) throw InputError("value_convergence: empty trajectory");
  if (window < 1) throw InputError("value_convergence: window must be >= 1");
  const std::size_t last = traj.last_index();
  if (window > last) throw InputError("value_convergence: window exceeds N");
  const std::size_t first_index = last - window + 1;
  std::size_t k = traj.size();
  while (k > 0 && traj.index(k - 1) >= first_index) --k;
  double lo = traj.value(k), hi = traj.value(k);
  CompensatedSum s;
  for (std::size_t r = k; r < traj.size(); ++r) {
    lo = std::min(lo, traj.value(r));
    hi = std::max(hi, traj.value(r));
    s.add(traj.value(r));
  }
  return {hi - lo, s.value() / static_cast<double>(traj.size() - k)};
}

// ---------------------------------------------------------------------------

struct Region {
  std::string label;
  std::function<bool(ConstView)> indicator;
  Vector gradient;
};

/// One region per piece of a max-affine function: the points where that
/// piece is the first active one (same tie rule as first-active selection).
inline std::vector<Region> polyhedral_regions(const PolyhedralFunction& f,
                                              double tol_active = kDefaultActiveTolerance) {
  std::vector<Region> out;
  for (std::size_t j = 0; j < f.pieces().size(); ++j) {
    out.push_back(Region{"piece" + std::to_string(j + 1),
                         [&f, j, tol_active](ConstView x) { return f.region(x, tol_active) == j; },
                         f.pieces()[j].gradient});
  }
  return out;
}

struct OccupationPoint {
  std::size_t n = 0;
  std::vector<double> fractions;  // lambda_r(N) = t_N(region r) / t_N
  double residual = 0.0;          // ||sum_r lambda_r g_r||
};

inline std::vector<OccupationPoint> region_occupation(const Trajectory& traj,
                                                      const std::vector<Region>& regions,
                                                      const std::vector<std::size_t>& cps) {
  traj.require_dense("region_occupation");
  validate_checkpoints(cps, traj, "region_occupation");
  if (regions.empty()) throw InputError("region_occupation: no regions");
  for (const auto& r : regions) require_dimension(r.gradient, traj.dimension(), "region gradient");
  std::vector<CompensatedSum> mass(regions.size());
  std::vector<OccupationPoint> out;
  std::size_t next = 0;
  for (std::size_t i = 0; i <= cps.back(); ++i) {
    for (std::size_t r = 0; r < regions.size(); ++r) {
      if (regions[r].indicator(traj.point(i))) {
        mass[r].add(traj.step(i));
        break;
      }
    }
    if (i == cps[next]) {
      OccupationPoint p{i, std::vector<double>(regions.size()), 0.0};
      Vector mix(traj.dimension(), 0.0);
      for (std::size_t r = 0; r < regions.size(); ++r) {
        p.fractions[r] = mass[r].value() / traj.time(i);
        for (std::size_t c = 0; c < mix.size(); ++c)
          mix[c] += p.fractions[r] * regions[r].gradient[c];
      }
      p.residual = norm(mix);
      out.push_back(std::move(p));
      ++next;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct EssAccCell {
  std::size_t cell = 0;
  std::vector<std::size_t> multi_index;
  Vector center;
  std::vector<double> fractions;  // t_{N_k}(cell) / t_{N_k} per checkpoint
  double estimate = 0.0;          // max of the tail-half fractions
  bool flagged = false;           // estimate > tau
  bool visited_in_tail = false;   // some iterate at or after the tail start
  double mass = 0.0;              // up to the last checkpoint
  Vector mean_point;              // mass-weighted
  std::optional<double> dist_center;
  std::optional<double> dist_mean;
};

struct EssAccReport {
  GridSpec grid;
  std::vector<std::size_t> checkpoints;
  std::size_t tail_start = 0;  // index into checkpoints
  double tau = kDefaultEssAccThreshold;
  double probe_radius = 0.0;   // resolution of the criticality probe
  std::vector<EssAccCell> cells;
  std::vector<double> overflow_fractions;

  std::vector<const EssAccCell*> flagged() const {
    std::vector<const EssAccCell*> out;
    for (const auto& c : cells)
      if (c.flagged) out.push_back(&c);
    return out;
  }
  std::vector<const EssAccCell*> visited_in_tail() const {
    std::vector<const EssAccCell*> out;
    for (const auto& c : cells)
      if (c.visited_in_tail) out.push_back(&c);
    return out;
  }
};

/// Finite-N surrogate of the essential accumulation set on a grid.
///
/// The limsup of t_N(cell)/t_N is estimated by the max over the tail half
/// of the checkpoints. With an oracle, each flagged cell is probed for
/// criticality at its center and at its mass-weighted mean point, using the
/// subdifferential at the resolution of half a cell diagonal.
inline EssAccReport essacc_estimate(const Trajectory& traj, const GridSpec& grid,
                                    const std::vector<std::size_t>& cps, double tau,
                                    const FunctionOracle* oracle = nullptr) {
  traj.require_dense("essacc_estimate");
  grid.validate();
  require_dimension(grid.box.lo, traj.dimension(), "essacc_estimate: grid box");
  validate_checkpoints(cps, traj, "essacc_estimate");
  if (!(tau > 0.0 && tau < 1.0)) throw InputError("essacc_estimate: tau must lie in (0, 1)");

  struct Accum {
    double mass = 0.0;
    Vector pos_sum;
    std::vector<double> fr;
    std::size_t last_visit = 0;
  };
  const std::size_t n = traj.dimension();
  const std::size_t kc = cps.size();
  std::map<std::size_t, Accum> acc;
  Accum overflow;
  overflow.fr.assign(kc, 0.0);
  std::size_t next = 0;
  for (std::size_t i = 0; i <= cps.back(); ++i) {
    const auto cell = grid.cell_of(traj.point(i));
    Accum& a = cell ? acc[*cell] : overflow;
    if (a.pos_sum.empty()) {
      a.pos_sum.assign(n, 0.0);
      a.fr.assign(kc, 0.0);
    }
    a.mass += traj.step(i);
    for (std::size_t c = 0; c < n; ++c) a.pos_sum[c] += traj.step(i) * traj.point(i)[c];
    a.last_visit = i;
    if (i == cps[next]) {
      const double t = traj.time(i);
      for (auto& [_, b] : acc) b.fr[next] = b.mass / t;
      overflow.fr[next] = overflow.mass / t;
      ++next;
    }
  }

  EssAccReport rep;
  rep.grid = grid;
  rep.checkpoints = cps;
  rep.tail_start = kc / 2;
  rep.tau = tau;
  rep.probe_radius = 0.5 * grid.diagonal();
  rep.overflow_fractions = overflow.fr;
  const std::size_t tail_index = cps[rep.tail_start];
  for (auto& [lin, a] : acc) {
    EssAccCell c;
    c.cell = lin;
    c.multi_index = grid.multi_index(lin);
    c.center = grid.center(lin);
    c.fractions = a.fr;
    for (std::size_t k = rep.tail_start; k < kc; ++k) c.estimate = std::max(c.estimate, a.fr[k]);
    c.flagged = c.estimate > tau;
    c.visited_in_tail = a.last_visit >= tail_index;
    c.mass = a.mass;
    c.mean_point = scaled(a.pos_sum, 1.0 / a.mass);
    if (oracle != nullptr && c.flagged) {
      c.dist_center = dist_to_critical(oracle->subdifferential_within(c.center, rep.probe_radius));
      c.dist_mean =
          dist_to_critical(oracle->subdifferential_within(c.mean_point, rep.probe_radius));
    }
    rep.cells.push_back(std::move(c));
  }
  return rep;
}

// ---------------------------------------------------------------------------

struct DefectPoint {
  std::size_t n = 0;
  double defect = 0.0;
};

/// Closedness defect of the prefix measures mu_{[0, N_k]} at each
/// checkpoint, all normalized on the same box (default: bounding box of the
/// points up to the last checkpoint) so the values are comparable.
inline std::vector<DefectPoint> defect_series(const Trajectory& traj, int degree,
                                              const std::vector<std::size_t>& cps,
                                              std::optional<Box> box = std::nullopt) {
  traj.require_dense("defect_series");
  validate_checkpoints(cps, traj, "defect_series");
  if (degree < 1) throw InputError("defect_series: degree must be >= 1");
  const std::size_t n = traj.dimension();
  if (!box) box = phase_measure(traj, 0, cps.back()).bounding_box();
  require_dimension(box->lo, n, "defect_series: box");
  Vector far(n);
  for (std::size_t c = 0; c < n; ++c) far[c] = std::max(std::abs(box->lo[c]), std::abs(box->hi[c]));
  std::vector<std::vector<int>> powers;
  std::vector<double> scales;
  for (auto& p : monomial_powers(n, degree)) {
    const double s = norm(detail::monomial_gradient(p, far));
    if (!(s > 0.0)) continue;
    powers.push_back(std::move(p));
    scales.push_back(s);
  }
  std::vector<CompensatedSum> sums(powers.size());
  CompensatedSum mass;
  std::vector<DefectPoint> out;
  std::size_t next = 0;
  for (std::size_t i = 0; i <= cps.back(); ++i) {
    mass.add(traj.step(i));
    for (std::size_t q = 0; q < powers.size(); ++q)
      sums[q].add(-traj.step(i) * dot(detail::monomial_gradient(powers[q], traj.point(i)),
                                      traj.velocity(i)));
    if (i == cps[next]) {
      DefectPoint p{i, 0.0};
      for (std::size_t q = 0; q < powers.size(); ++q)
        p.defect = std::max(p.defect, std::abs(sums[q].value()) / mass.value() / scales[q]);
      out.push_back(p);
      ++next;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct CentroidPoint {
  std::size_t n = 0;
  double mean_centroid_norm = 0.0;  // mass-weighted mean of ||vbar_c|| over in-box cells
  std::size_t cells = 0;
};

/// Mean centroid norm of the prefix measures mu_{[0, N_k]} binned on `grid`,
/// computed in a single pass.
inline std::vector<CentroidPoint> centroid_series(const Trajectory& traj, const GridSpec& grid,
                                                  const std::vector<std::size_t>& cps) {
  traj.require_dense("centroid_series");
  grid.validate();
  require_dimension(grid.box.lo, traj.dimension(), "centroid_series: grid box");
  validate_checkpoints(cps, traj, "centroid_series");
  const std::size_t n = traj.dimension();
  std::map<std::size_t, CellStats> cells;
  Vector minus_v(n);
  std::vector<CentroidPoint> out;
  std::size_t next = 0;
  for (std::size_t i = 0; i <= cps.back(); ++i) {
    if (const auto cell = grid.cell_of(traj.point(i))) {
      for (std::size_t c = 0; c < n; ++c) minus_v[c] = -traj.velocity(i)[c];
      cells[*cell].add(traj.point(i), minus_v, traj.step(i));
    }
    if (i == cps[next]) {
      double num = 0.0, den = 0.0;
      for (const auto& [_, s] : cells) {
        num += s.mass * norm(s.centroid());
        den += s.mass;
      }
      out.push_back({i, den > 0.0 ? num / den : 0.0, cells.size()});
      ++next;
    }
  }
  return out;
}

}  // namespace subgrad

#endif  // SUBGRAD_DIAGNOSTICS_HPP
