#ifndef SUBGRAD_DYNAMICS_HPP
#define SUBGRAD_DYNAMICS_HPP

// The vanishing-step subgradient recursion x_{i+1} = x_i - eps_i v_i and the
// record of one run.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "subgrad/funcs.hpp"
#include "subgrad/selection.hpp"

namespace subgrad {

/// eps_i = c / (i + offset)^p with c > 0, p in (0, 1], offset >= 1.
struct StepSchedule {
  double c = 0.1;
  double p = 1.0;
  std::int64_t offset = 1;

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw InputError("schedule: c must be positive");
    if (!(p > 0.0 && p <= 1.0)) throw InputError("schedule: p must lie in (0, 1]");
    if (offset < 1) throw InputError("schedule: offset must be >= 1");
  }

  double operator()(std::size_t i) const {
    return c / std::pow(static_cast<double>(i) + static_cast<double>(offset), p);
  }

  friend bool operator==(const StepSchedule&, const StepSchedule&) = default;
};

enum class RunStatus { completed, diverged, non_finite };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::diverged: return "diverged";
    case RunStatus::non_finite: return "non-finite";
  }
  return "?";
}

struct TrajectoryMeta {
  std::string oracle_id;
  StepSchedule schedule;
  SelectionPolicy policy;
  std::size_t requested_steps = 0;
  std::size_t stride = 1;
};

/// Exact aggregates over every iterate, including the ones thinning drops.
struct RunAggregates {
  double final_time = 0.0;
  Vector sum_step_velocity;  // sum_{i<=N} eps_i v_i
  double f_min = std::numeric_limits<double>::infinity();
  double f_max = -std::numeric_limits<double>::infinity();
};

/// Recorded iterates (x_i, v_i, eps_i, t_i, f(x_i)) with t_i = sum_{j<=i} eps_j.
///
/// A dense trajectory stores every i in [0, N]; a thinned one stores every
/// stride-th iterate plus the last one.
class Trajectory {
 public:
  explicit Trajectory(std::size_t dimension = 0) : n_(dimension) {}

  void append(std::size_t index, ConstView x, ConstView v, double eps, double t, double f) {
    require_dimension(x, n_, "trajectory point");
    require_dimension(v, n_, "trajectory velocity");
    if (!indices_.empty() || index != steps_.size()) {
      if (indices_.empty())
        for (std::size_t k = 0; k < steps_.size(); ++k) indices_.push_back(k);
      indices_.push_back(index);
    }
    points_.insert(points_.end(), x.begin(), x.end());
    velocities_.insert(velocities_.end(), v.begin(), v.end());
    steps_.push_back(eps);
    times_.push_back(t);
    values_.push_back(f);
  }

  std::size_t dimension() const { return n_; }
  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  bool dense() const { return indices_.empty(); }

  std::size_t index(std::size_t k) const { return indices_.empty() ? k : indices_[k]; }
  /// Iterate index of the last stored row.
  std::size_t last_index() const { return index(size() - 1); }

  ConstView point(std::size_t k) const { return ConstView(points_).subspan(k * n_, n_); }
  ConstView velocity(std::size_t k) const { return ConstView(velocities_).subspan(k * n_, n_); }
  double step(std::size_t k) const { return steps_[k]; }
  double time(std::size_t k) const { return times_[k]; }
  double value(std::size_t k) const { return values_[k]; }

  const std::vector<double>& steps() const { return steps_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

  /// x_{N+1} = x_N - eps_N v_N, one step past the last stored row.
  Vector next_point() const {
    const std::size_t k = size() - 1;
    Vector out(n_);
    for (std::size_t c = 0; c < n_; ++c) out[c] = point(k)[c] - step(k) * velocity(k)[c];
    return out;
  }

  TrajectoryMeta meta;
  RunStatus status = RunStatus::completed;
  RunAggregates aggregates;

  void require_dense(const char* what) const {
    if (!dense()) throw InputError(std::string(what) + " needs a dense (unthinned) trajectory");
    if (empty()) throw InputError(std::string(what) + ": empty trajectory");
  }

 private:
  std::size_t n_;
  std::vector<double> points_;
  std::vector<double> velocities_;
  std::vector<double> steps_;
  std::vector<double> times_;
  std::vector<double> values_;
  std::vector<std::size_t> indices_;
};

inline constexpr std::size_t kMaxDenseIterates = 10'000'000;

struct RunOptions {
  /// Leaving this box stops the run and flags divergence. nullopt uses
  /// [-10, 10]^n; an explicitly disabled guard is not offered.
  std::optional<Box> guard_box;
  /// Keep every thin-th iterate; 0 picks 1 up to 1e7 iterates and the
  /// smallest factor that keeps at most 1e7 rows beyond that.
  std::size_t thin = 0;
  double tol_active = kDefaultActiveTolerance;
};

/// Run N steps of x_{i+1} = x_i - eps_i v_i, v_i chosen in the active
/// subdifferential by `policy`. Records N+1 iterates x_0..x_N together with
/// the v_i and eps_i used at each of them.
inline Trajectory run(const FunctionOracle& oracle, ConstView x0, const StepSchedule& schedule,
                      const SelectionPolicy& policy, std::size_t steps,
                      const RunOptions& options = {}) {
  const std::size_t n = oracle.dimension();
  require_dimension(x0, n, "run: x0");
  if (!all_finite(x0)) throw InputError("run: x0 is not finite");
  if (steps < 1) throw InputError("run: N must be >= 1");
  schedule.validate();
  const Box guard = options.guard_box.value_or(Box::cube(n, -10.0, 10.0));
  guard.validate();
  require_dimension(guard.lo, n, "run: guard box");

  std::size_t stride = options.thin;
  if (stride == 0)
    stride = steps + 1 <= kMaxDenseIterates ? 1 : (steps + kMaxDenseIterates) / kMaxDenseIterates;

  Trajectory traj(n);
  traj.meta = TrajectoryMeta{oracle.id(), schedule, policy, steps, stride};
  traj.aggregates.sum_step_velocity.assign(n, 0.0);
  CompensatedVectorSum drift(n);
  Selector selector(policy);

  Vector x(x0.begin(), x0.end());
  double t = 0.0;
  for (std::size_t i = 0;; ++i) {
    const double f = oracle.value(x);
    const Vector v = selector.select(oracle.subdifferential(x, options.tol_active));
    if (!std::isfinite(f) || !all_finite(v) || !all_finite(x)) {
      traj.status = RunStatus::non_finite;
      break;
    }
    const double eps = schedule(i);
    t += eps;
    const bool escaped = !guard.contains(x);
    if (i % stride == 0 || i == steps || escaped) traj.append(i, x, v, eps, t, f);
    drift.add_scaled(v, eps);
    traj.aggregates.final_time = t;
    traj.aggregates.f_min = std::min(traj.aggregates.f_min, f);
    traj.aggregates.f_max = std::max(traj.aggregates.f_max, f);
    if (escaped) {
      traj.status = RunStatus::diverged;
      break;
    }
    if (i == steps) break;
    for (std::size_t c = 0; c < n; ++c) x[c] -= eps * v[c];
  }
  traj.aggregates.sum_step_velocity = drift.value();
  return traj;
}

/// t_N(U): total step mass of the stored iterates j <= upto with x_j in U.
inline double time_in_set(const Trajectory& traj, const std::function<bool(ConstView)>& indicator,
                          std::size_t upto) {
  traj.require_dense("time_in_set");
  if (upto > traj.last_index()) throw InputError("time_in_set: index beyond trajectory");
  CompensatedSum s;
  for (std::size_t k = 0; k <= upto; ++k)
    if (indicator(traj.point(k))) s.add(traj.step(k));
  return s.value();
}

}  // namespace subgrad

#endif  // SUBGRAD_DYNAMICS_HPP
