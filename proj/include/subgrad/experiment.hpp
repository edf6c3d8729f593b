#ifndef SUBGRAD_EXPERIMENT_HPP
#define SUBGRAD_EXPERIMENT_HPP

// Experiment runner behind the command-line tool: run a config into a
// per-run directory, diagnose a stored run, tabulate several runs.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "subgrad/config.hpp"
#include "subgrad/diagnostics.hpp"
#include "subgrad/dynamics.hpp"
#include "subgrad/measures.hpp"
#include "subgrad/trajectory_io.hpp"

#ifndef SUBGRAD_VERSION
#define SUBGRAD_VERSION "0.0.0"
#endif

namespace subgrad::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInputError = 2,
  kDiverged = 3,
  kNumericFailure = 4,
  kThinnedTrajectory = 5,
};

class CommandError : public std::runtime_error {
 public:
  CommandError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

inline std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw CommandError(kInputError, "cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw CommandError(kFailure, "cannot write '" + p.string() + "'");
}

inline std::string g17(double x) {
  std::string s;
  append_g17(s, x);
  return s;
}

/// JSON number, or null for NaN and infinities.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// ---------------------------------------------------------------------------

struct RunManifest {
  fs::path dir;  // directory holding manifest.json; artifact paths are relative to it
  std::string name;
  std::string config_snapshot;
  std::string trajectory = "trajectory.csv";
  std::string config_file = "config.txt";
  std::string summary;  // empty until diagnosed
  std::map<std::string, std::vector<std::string>> diagnostic_files;
  double wall_clock_seconds = 0.0;
  std::string version = SUBGRAD_VERSION;
  std::string status = "completed";
  bool diverged = false;
  std::size_t last_index = 0;
  std::size_t rows = 0;
  std::size_t stride = 1;
  double final_f = 0.0;
  double final_time = 0.0;

  fs::path path() const { return dir / "manifest.json"; }

  json to_json() const {
    json j;
    j["name"] = name;
    j["version"] = version;
    j["status"] = status;
    j["diverged"] = diverged;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["last_index"] = last_index;
    j["rows"] = rows;
    j["stride"] = stride;
    j["final_f"] = num(final_f);
    j["final_time"] = num(final_time);
    j["config"] = config_snapshot;
    j["paths"]["trajectory"] = trajectory;
    j["paths"]["config"] = config_file;
    if (!summary.empty()) j["paths"]["summary"] = summary;
    if (!diagnostic_files.empty()) j["paths"]["diagnostics"] = diagnostic_files;
    return j;
  }

  static RunManifest from_json(const json& j, fs::path dir) {
    RunManifest m;
    m.dir = std::move(dir);
    m.name = j.at("name").get<std::string>();
    m.version = j.value("version", "");
    m.status = j.value("status", "completed");
    m.diverged = j.value("diverged", false);
    m.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
    m.last_index = j.value("last_index", std::size_t{0});
    m.rows = j.value("rows", std::size_t{0});
    m.stride = j.value("stride", std::size_t{1});
    m.final_f = j["final_f"].is_number() ? j["final_f"].get<double>() : NAN;
    m.final_time = j["final_time"].is_number() ? j["final_time"].get<double>() : NAN;
    m.config_snapshot = j.at("config").get<std::string>();
    const auto& p = j.at("paths");
    m.trajectory = p.at("trajectory").get<std::string>();
    m.config_file = p.value("config", "config.txt");
    m.summary = p.value("summary", "");
    if (p.contains("diagnostics"))
      m.diagnostic_files = p["diagnostics"].get<std::map<std::string, std::vector<std::string>>>();
    return m;
  }

  void save() const { write_text(path(), to_json().dump(2) + "\n"); }

  static RunManifest load(const fs::path& manifest_path) {
    const std::string text = read_text(manifest_path);
    try {
      return from_json(json::parse(text), manifest_path.parent_path());
    } catch (const json::exception& e) {
      throw CommandError(kInputError,
                         "malformed manifest '" + manifest_path.string() + "': " + e.what());
    }
  }
};

inline int exit_code_for(const RunManifest& m) {
  if (m.status == to_string(RunStatus::diverged)) return kDiverged;
  if (m.status == to_string(RunStatus::non_finite)) return kNumericFailure;
  return kOk;
}

// ---------------------------------------------------------------------------

/// Runs one validated config into `<out_dir>/<name>/` and writes the
/// trajectory, the config snapshot and manifest.json. The manifest is
/// written for diverged and non-finite runs as well.
inline RunManifest cmd_run(ExperimentConfig cfg, const fs::path& out_dir,
                           std::optional<std::size_t> thin = std::nullopt) {
  if (thin) cfg.thin = *thin;
  try {
    validate_config(cfg);
  } catch (const InputError& e) {
    throw CommandError(kInputError, e.what());
  }
  const OraclePtr oracle = make_oracle(cfg.function);
  RunOptions opts;
  opts.guard_box = cfg.guard_box();
  opts.thin = cfg.thin;
  opts.tol_active = cfg.tol_active;

  const auto t0 = std::chrono::steady_clock::now();
  Trajectory traj;
  try {
    traj = run(*oracle, cfg.x0, cfg.schedule, cfg.policy, cfg.steps, opts);
  } catch (const NumericError& e) {
    throw CommandError(kNumericFailure, e.what());
  }
  const auto t1 = std::chrono::steady_clock::now();

  RunManifest m;
  m.dir = out_dir / cfg.name;
  m.name = cfg.name;
  m.config_snapshot = emit_config(cfg);
  m.wall_clock_seconds = std::chrono::duration<double>(t1 - t0).count();
  m.status = to_string(traj.status);
  m.diverged = traj.status == RunStatus::diverged;
  m.rows = traj.size();
  m.last_index = traj.empty() ? 0 : traj.last_index();
  m.stride = traj.meta.stride;
  m.final_f = traj.empty() ? NAN : traj.value(traj.size() - 1);
  m.final_time = traj.aggregates.final_time;

  std::error_code ec;
  fs::create_directories(m.dir, ec);
  if (ec) throw CommandError(kFailure, "cannot create '" + m.dir.string() + "': " + ec.message());
  write_trajectory_csv((m.dir / m.trajectory).string(), traj);
  write_text(m.dir / m.config_file, m.config_snapshot);
  m.save();
  return m;
}

// ---------------------------------------------------------------------------

struct DiagnosticOutput {
  DiagnosticOutput() = default;
  explicit DiagnosticOutput(std::string n) : name(std::move(n)) {}

  std::string name;
  std::string verdict = "info";  // pass | fail | inapplicable | info
  json fields = json::object();
  std::vector<std::pair<std::string, std::string>> files;  // (file name, contents)
};

inline std::string csv_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return g17(x);
}

inline std::string verdict(bool ok) { return ok ? "pass" : "fail"; }

/// Everything a diagnostic needs from a stored run.
struct DiagnosticContext {
  const ExperimentConfig& cfg;
  const Trajectory& traj;
  const FunctionOracle& oracle;
  std::vector<std::size_t> checkpoints;
};

namespace detail {

inline DiagnosticOutput diag_global(const DiagnosticContext& ctx) {
  const auto& traj = ctx.traj;
  DiagnosticOutput out("global");
  const std::size_t n = traj.dimension();
  CompensatedVectorSum drift(n);
  std::ostringstream csv;
  csv << "N,t,displacement,ratio\n";
  std::size_t next = 0;
  std::optional<double> ratio_1e3;
  double ratio_first = NAN, ratio_final = NAN;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    drift.add_scaled(traj.velocity(i), traj.step(i));
    if (next < ctx.checkpoints.size() && i == ctx.checkpoints[next]) {
      const double disp = distance(traj.point(i), traj.point(0));
      const double ratio = disp / traj.time(i);
      csv << i << ',' << csv_num(traj.time(i)) << ',' << csv_num(disp) << ',' << csv_num(ratio)
          << '\n';
      if (next == 0) ratio_first = ratio;
      if (i == 1000) ratio_1e3 = ratio;
      ratio_final = ratio;
      ++next;
    }
  }
  const Vector x_next = traj.next_point();
  const Vector expected = traj.point(0) - x_next;
  const double scale =
      std::max({norm(traj.point(0)), norm(x_next), norm(expected), std::numeric_limits<double>::min()});
  const double err = distance(drift.value(), expected) / scale;
  out.fields["telescoping_relative_error"] = num(err);
  out.fields["ratio_first"] = num(ratio_first);
  out.fields["ratio_final"] = num(ratio_final);
  if (ratio_1e3) {
    out.fields["ratio_at_1000"] = num(*ratio_1e3);
    out.fields["reduction_from_1000"] = num(ratio_final / *ratio_1e3);
  }
  out.verdict = verdict(err <= ctx.cfg.global.tolerance);
  out.files.emplace_back("global.csv", csv.str());
  return out;
}

inline DiagnosticOutput diag_values(const DiagnosticContext& ctx) {
  DiagnosticOutput out("values");
  const auto vc = value_convergence(ctx.traj, ctx.cfg.values.window);
  out.fields["window"] = ctx.cfg.values.window;
  out.fields["tail_oscillation"] = num(vc.tail_oscillation);
  out.fields["f_limit_estimate"] = num(vc.f_limit_estimate);
  out.verdict = verdict(vc.tail_oscillation <= ctx.cfg.values.max_oscillation);
  out.files.emplace_back("values.csv", "window,tail_oscillation,f_limit_estimate\n" +
                                           std::to_string(ctx.cfg.values.window) + ',' +
                                           csv_num(vc.tail_oscillation) + ',' +
                                           csv_num(vc.f_limit_estimate) + '\n');
  return out;
}

inline DiagnosticOutput diag_regions(const DiagnosticContext& ctx) {
  DiagnosticOutput out("regions");
  const PolyhedralFunction* poly = ctx.oracle.as_polyhedral();
  if (poly == nullptr) {
    out.verdict = "inapplicable";
    out.fields["reason"] = "function is not polyhedral";
    return out;
  }
  const auto regions = polyhedral_regions(*poly, ctx.cfg.tol_active);
  const auto series = region_occupation(ctx.traj, regions, ctx.checkpoints);
  std::ostringstream csv;
  csv << 'N';
  for (const auto& r : regions) csv << ",lambda_" << r.label;
  csv << ",residual\n";
  for (const auto& p : series) {
    csv << p.n;
    for (double l : p.fractions) csv << ',' << csv_num(l);
    csv << ',' << csv_num(p.residual) << '\n';
  }
  const auto& last = series.back();
  out.fields["fractions_final"] = last.fractions;
  out.fields["residual_final"] = num(last.residual);
  out.verdict = verdict(last.residual <= ctx.cfg.regions.max_residual);
  out.files.emplace_back("regions.csv", csv.str());
  return out;
}

inline DiagnosticOutput diag_compensation(const DiagnosticContext& ctx) {
  DiagnosticOutput out("compensation");
  const auto& p = ctx.cfg.compensation;
  const Cutoff psi{center_or_origin(p.center, ctx.traj.dimension()), p.eta, p.delta};
  const auto series = compensation_ratio(ctx.traj, psi, ctx.checkpoints);
  std::ostringstream csv;
  csv << "N,ratio,mass\n";
  for (const auto& q : series)
    csv << q.n << ',' << csv_num(q.ratio.value_or(NAN)) << ',' << csv_num(q.mass) << '\n';
  const auto& last = series.back();
  out.fields["ratio_final"] = last.ratio ? num(*last.ratio) : json(nullptr);
  out.fields["mass_final"] = num(last.mass);
  const auto first = std::find_if(series.begin(), series.end(),
                                  [](const CompensationPoint& q) { return q.ratio.has_value(); });
  if (first != series.end() && last.ratio && *last.ratio > 0.0)
    out.fields["reduction"] = num(*first->ratio / *last.ratio);
  if (!last.ratio || last.mass == 0.0) {
    out.verdict = "inapplicable";
    out.fields["reason"] = "the run never enters the support of the cutoff";
  } else {
    out.verdict = verdict(*last.ratio <= p.max_ratio);
  }
  out.files.emplace_back("compensation.csv", csv.str());
  return out;
}

inline DiagnosticOutput diag_essacc(const DiagnosticContext& ctx) {
  DiagnosticOutput out("essacc");
  const auto& p = ctx.cfg.essacc;
  const GridSpec grid{p.box.value_or(ctx.cfg.guard_box()), p.resolution};
  const auto rep = essacc_estimate(ctx.traj, grid, ctx.checkpoints, p.tau, &ctx.oracle);
  const std::size_t n = ctx.traj.dimension();
  std::ostringstream csv;
  for (std::size_t c = 0; c < n; ++c) csv << "cell_ix" << c << ',';
  for (std::size_t c = 0; c < n; ++c) csv << "center" << c << ',';
  csv << "estimate,flagged,visited_in_tail,mass,";
  for (std::size_t c = 0; c < n; ++c) csv << "mean" << c << ',';
  csv << "dist_center,dist_mean\n";
  json flagged = json::array();
  bool ok = true;
  double worst = 0.0;
  for (const auto& cell : rep.cells) {
    for (auto ix : cell.multi_index) csv << ix << ',';
    for (double x : cell.center) csv << csv_num(x) << ',';
    csv << csv_num(cell.estimate) << ',' << (cell.flagged ? 1 : 0) << ','
        << (cell.visited_in_tail ? 1 : 0) << ',' << csv_num(cell.mass) << ',';
    for (double x : cell.mean_point) csv << csv_num(x) << ',';
    csv << (cell.dist_center ? csv_num(*cell.dist_center) : "") << ','
        << (cell.dist_mean ? csv_num(*cell.dist_mean) : "") << '\n';
    if (cell.flagged) {
      flagged.push_back({{"cell", cell.multi_index},
                         {"center", cell.center},
                         {"estimate", num(cell.estimate)},
                         {"dist_mean", num(cell.dist_mean.value_or(NAN))}});
      worst = std::max(worst, cell.dist_mean.value_or(0.0));
      ok = ok && cell.dist_mean.value_or(0.0) <= p.max_dist;
    }
  }
  out.fields["flagged"] = flagged;
  out.fields["flagged_count"] = flagged.size();
  out.fields["visited_in_tail_count"] = rep.visited_in_tail().size();
  out.fields["max_dist_mean"] = num(worst);
  out.fields["probe_radius"] = num(rep.probe_radius);
  out.fields["tail_start"] = ctx.checkpoints[rep.tail_start];
  out.verdict = flagged.empty() ? "inapplicable" : verdict(ok);
  out.files.emplace_back("essacc_cells.csv", csv.str());

  std::ostringstream series;
  series << "N,overflow";
  for (const auto& cell : rep.cells)
    if (cell.flagged) {
      series << ",cell";
      for (auto ix : cell.multi_index) series << '_' << ix;
    }
  series << '\n';
  for (std::size_t k = 0; k < rep.checkpoints.size(); ++k) {
    series << rep.checkpoints[k] << ',' << csv_num(rep.overflow_fractions[k]);
    for (const auto& cell : rep.cells)
      if (cell.flagged) series << ',' << csv_num(cell.fractions[k]);
    series << '\n';
  }
  out.files.emplace_back("essacc_series.csv", series.str());
  return out;
}

inline DiagnosticOutput diag_intervals(const DiagnosticContext& ctx) {
  DiagnosticOutput out("intervals");
  const auto& p = ctx.cfg.intervals;
  const std::size_t n = ctx.traj.dimension();
  const auto dec = interval_decomposition(ctx.traj, center_or_origin(p.center, n), p.eta, p.delta);
  std::ostringstream csv;
  csv << "first,last,length,time,";
  for (std::size_t c = 0; c < n; ++c) csv << "sum_eps_v" << c << ',';
  csv << "open_ended\n";
  for (const auto& iv : dec.intervals) {
    csv << iv.first << ',' << iv.last << ',' << iv.length() << ',' << csv_num(iv.time) << ',';
    for (double x : iv.sum_step_velocity) csv << csv_num(x) << ',';
    csv << (iv.open_ended ? 1 : 0) << '\n';
  }
  out.fields["count"] = dec.intervals.size();
  out.fields["statistic"] = dec.statistic ? num(*dec.statistic) : json(nullptr);
  out.verdict = dec.statistic ? verdict(*dec.statistic <= p.max_statistic) : "inapplicable";
  out.files.emplace_back("intervals.csv", csv.str());
  return out;
}

inline DiagnosticOutput diag_separation(const DiagnosticContext& ctx) {
  DiagnosticOutput out("separation");
  const auto& p = ctx.cfg.separation;
  const auto series = separation_series(ctx.traj, Ball{p.x, p.radius}, Ball{p.y, p.radius});
  std::ostringstream csv;
  csv << "j,T\n";
  for (std::size_t j : ctx.checkpoints) csv << j << ',' << csv_num(series[j]) << '\n';
  const double t0 = series.front();
  const double t_half = series[ctx.traj.last_index() / 2];
  bool monotone = true;
  for (std::size_t j = 1; j < series.size(); ++j) monotone = monotone && series[j] >= series[j - 1];
  out.fields["T0"] = num(t0);
  out.fields["T_half"] = num(t_half);
  out.fields["trend"] = std::isfinite(t0) && std::isfinite(t_half) ? num(t_half / t0) : json(nullptr);
  out.fields["nondecreasing"] = monotone;
  out.files.emplace_back("separation.csv", csv.str());
  return out;
}

inline DiagnosticOutput diag_perpendicularity(const DiagnosticContext& ctx) {
  DiagnosticOutput out("perpendicularity");
  const auto& p = ctx.cfg.perpendicularity;
  const Vector center = center_or_origin(p.center, ctx.traj.dimension());
  std::vector<Vector> basis = p.tangents;
  std::string source = "config";
  if (basis.empty()) {
    source = "none";
    if (const Stratum* s = ctx.oracle.stratum_containing(center, 1e-9)) {
      basis = s->tangents;
      source = "stratum " + s->label;
    }
  }
  std::optional<double> vmin;
  if (p.min_velocity_norm > 0.0) vmin = p.min_velocity_norm;
  const auto rep = perpendicularity(ctx.traj, center, p.radius, basis, p.tail_fraction, vmin);
  out.fields["basis_source"] = source;
  out.fields["basis_dimension"] = rep.basis_dimension;
  out.fields["samples"] = rep.samples;
  out.fields["velocity_threshold"] = num(rep.velocity_threshold);
  out.fields["max_abs"] = num(rep.max_abs);
  out.fields["mean_abs"] = num(rep.mean_abs);
  out.verdict = rep.empty() ? "inapplicable" : verdict(rep.max_abs <= p.max_abs);
  out.files.emplace_back("perpendicularity.csv",
                         "samples,basis_dimension,velocity_threshold,max_abs,mean_abs\n" +
                             std::to_string(rep.samples) + ',' +
                             std::to_string(rep.basis_dimension) + ',' +
                             csv_num(rep.velocity_threshold) + ',' + csv_num(rep.max_abs) + ',' +
                             csv_num(rep.mean_abs) + '\n');
  return out;
}

inline DiagnosticOutput diag_circulation(const DiagnosticContext& ctx) {
  DiagnosticOutput out("circulation");
  const auto& p = ctx.cfg.circulation;
  const auto res = circulation(ctx.traj, ctx.oracle, p.policy, p.subsamples, p.mode,
                               ctx.cfg.tol_active);
  const double f0 = ctx.traj.value(0), fN = ctx.traj.value(ctx.traj.size() - 1);
  const double scale =
      std::max((std::abs(f0) + std::abs(fN)) / res.elapsed, std::numeric_limits<double>::min());
  const double rel = std::abs(res.integral - res.reference) / scale;
  out.fields["mode"] = to_string(res.mode);
  out.fields["policy"] = to_string(p.policy.kind);
  out.fields["integral"] = num(res.integral);
  out.fields["reference"] = num(res.reference);
  out.fields["relative_error"] = num(rel);
  out.verdict = verdict(rel <= p.tolerance);
  out.files.emplace_back("circulation.csv",
                         "mode,policy,integral,reference,relative_error\n" + to_string(res.mode) +
                             ',' + to_string(p.policy.kind) + ',' + csv_num(res.integral) + ',' +
                             csv_num(res.reference) + ',' + csv_num(rel) + '\n');
  return out;
}

inline DiagnosticOutput diag_defect(const DiagnosticContext& ctx) {
  DiagnosticOutput out("defect");
  const auto& p = ctx.cfg.defect;
  const auto series = defect_series(ctx.traj, p.degree, ctx.checkpoints, p.box);
  std::ostringstream csv;
  csv << "N,defect\n";
  for (const auto& q : series) csv << q.n << ',' << csv_num(q.defect) << '\n';
  out.fields["degree"] = p.degree;
  out.fields["defect_first"] = num(series.front().defect);
  out.fields["defect_final"] = num(series.back().defect);
  out.files.emplace_back("defect.csv", csv.str());
  const auto mu = phase_measure(ctx.traj, 0, ctx.traj.last_index());
  out.files.emplace_back("defect_report.txt", closedness_defect(mu, p.degree, p.box).to_text());
  return out;
}

inline DiagnosticOutput diag_centroid(const DiagnosticContext& ctx) {
  DiagnosticOutput out("centroid");
  const auto& p = ctx.cfg.centroid;
  const GridSpec grid{p.box.value_or(ctx.cfg.guard_box()), p.resolution};
  const auto series = centroid_series(ctx.traj, grid, ctx.checkpoints);
  std::ostringstream csv;
  csv << "N,mean_centroid_norm,cells\n";
  for (const auto& q : series) csv << q.n << ',' << csv_num(q.mean_centroid_norm) << ',' << q.cells << '\n';
  out.files.emplace_back("centroid_series.csv", csv.str());

  const auto mu = phase_measure(ctx.traj, 0, ctx.traj.last_index());
  const auto field = centroid_field(mu, grid.box, grid.resolution);
  std::ostringstream cells;
  field.write_csv(cells);
  out.fields["cells"] = field.cells.size();
  out.fields["mean_centroid_norm_first"] = num(series.front().mean_centroid_norm);
  out.fields["mean_centroid_norm_final"] = num(series.back().mean_centroid_norm);
  out.fields["overflow_mass_fraction"] = num(field.overflow.mass / field.total_mass());
  out.files.emplace_back("centroid_cells.csv", cells.str());
  return out;
}

}  // namespace detail

inline DiagnosticOutput run_diagnostic(const std::string& name, const DiagnosticContext& ctx) {
  if (name == "global") return detail::diag_global(ctx);
  if (name == "values") return detail::diag_values(ctx);
  if (name == "regions") return detail::diag_regions(ctx);
  if (name == "compensation") return detail::diag_compensation(ctx);
  if (name == "essacc") return detail::diag_essacc(ctx);
  if (name == "intervals") return detail::diag_intervals(ctx);
  if (name == "separation") return detail::diag_separation(ctx);
  if (name == "perpendicularity") return detail::diag_perpendicularity(ctx);
  if (name == "circulation") return detail::diag_circulation(ctx);
  if (name == "defect") return detail::diag_defect(ctx);
  if (name == "centroid") return detail::diag_centroid(ctx);
  throw CommandError(kInputError, "unknown diagnostic '" + name + "'");
}

/// Diagnostics used when neither the config nor the command line names any.
inline std::vector<std::string> default_diagnostics(const ExperimentConfig& cfg,
                                                    std::size_t last_index) {
  std::vector<std::string> out{"global"};
  if (cfg.values.window <= last_index) out.push_back("values");
  for (const char* d : {"regions", "compensation", "essacc", "circulation", "defect", "centroid"})
    out.emplace_back(d);
  return out;
}

/// Runs the selected diagnostics over a stored run. Writes one or more
/// files per diagnostic under `<run>/diagnostics/`, a combined summary.json,
/// and records the paths in the manifest.
inline json cmd_diagnose(const fs::path& manifest_path, const std::vector<std::string>& only = {},
                         unsigned jobs = 1) {
  RunManifest m = RunManifest::load(manifest_path);
  const fs::path traj_path = m.dir / m.trajectory;
  if (!fs::exists(traj_path))
    throw CommandError(kInputError, "trajectory '" + traj_path.string() + "' is missing");
  ExperimentConfig cfg;
  try {
    cfg = parse_config(m.config_snapshot);
  } catch (const InputError& e) {
    throw CommandError(kInputError, std::string("manifest config: ") + e.what());
  }
  Trajectory traj;
  try {
    traj = read_trajectory_csv(traj_path.string());
  } catch (const IoError& e) {
    throw CommandError(kInputError, e.what());
  }
  std::vector<std::string> selection = only.empty() ? cfg.diagnostics : only;
  if (selection.empty()) selection = default_diagnostics(cfg, traj.last_index());
  cfg.diagnostics = selection;
  cfg.steps = traj.last_index();
  try {
    if (cfg.steps < 1) throw InputError("trajectory has no steps");
    validate_config(cfg);
  } catch (const InputError& e) {
    throw CommandError(kInputError, e.what());
  }
  if (!traj.dense()) {
    for (const auto& d : selection)
      if (needs_dense(d))
        throw CommandError(kThinnedTrajectory,
                           "diagnostic '" + d + "' needs every iterate of the prefix, but the "
                           "trajectory is thinned (stride " + std::to_string(traj.meta.stride) +
                           "); rerun with --thin 1 or select only 'values'");
  }
  const OraclePtr oracle = make_oracle(cfg.function);
  traj.meta.oracle_id = oracle->id();
  traj.meta.schedule = cfg.schedule;
  traj.meta.policy = cfg.policy;

  DiagnosticContext ctx{cfg, traj, *oracle,
                        geometric_checkpoints(traj.last_index(), cfg.checkpoints.per_decade,
                                              std::min(cfg.checkpoints.first, traj.last_index()))};

  std::vector<DiagnosticOutput> results(selection.size());
  std::vector<std::string> errors(selection.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < selection.size();) {
      try {
        results[k] = run_diagnostic(selection[k], ctx);
      } catch (const std::exception& e) {
        errors[k] = selection[k] + ": " + e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < std::max(1u, jobs); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (!e.empty()) throw CommandError(kNumericFailure, "diagnostic " + e);

  const fs::path dir = m.dir / "diagnostics";
  fs::create_directories(dir);
  json summary;
  summary["name"] = m.name;
  summary["last_index"] = traj.last_index();
  summary["diagnostics"] = json::object();
  for (const auto& r : results) {
    json entry = r.fields;
    entry["verdict"] = r.verdict;
    std::vector<std::string> files;
    for (const auto& [file, text] : r.files) {
      write_text(dir / file, text);
      files.push_back((fs::path("diagnostics") / file).generic_string());
    }
    entry["files"] = files;
    summary["diagnostics"][r.name] = entry;
    m.diagnostic_files[r.name] = files;
  }
  m.summary = "summary.json";
  write_text(m.dir / m.summary, summary.dump(2) + "\n");
  m.save();
  return summary;
}

// ---------------------------------------------------------------------------

struct ReportRow {
  std::vector<std::string> cells;
};

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{
      "name",   "function", "policy", "seed",         "N",        "status",
      "final_f", "tail_oscillation", "compensation_R", "residual", "separation_trend"};
  return cols;
}

/// One row of key scalars per manifest, as CSV and as an aligned table.
inline std::pair<std::string, std::string> cmd_report(const std::vector<fs::path>& manifests) {
  if (manifests.empty()) throw CommandError(kInputError, "report needs at least one manifest");
  std::vector<std::vector<std::string>> rows{report_columns()};
  for (const auto& path : manifests) {
    const RunManifest m = RunManifest::load(path);
    ExperimentConfig cfg;
    try {
      cfg = parse_config(m.config_snapshot);
    } catch (const InputError& e) {
      throw CommandError(kInputError, path.string() + ": " + e.what());
    }
    json summary = json::object();
    if (!m.summary.empty() && fs::exists(m.dir / m.summary))
      summary = json::parse(read_text(m.dir / m.summary)).value("diagnostics", json::object());
    auto field = [&](const char* diag, const char* key) -> std::string {
      if (!summary.contains(diag)) return "";
      const auto& d = summary[diag];
      if (!d.contains(key) || !d[key].is_number()) return "";
      return g17(d[key].get<double>());
    };
    rows.push_back({m.name,
                    cfg.function.builtin.empty() ? "polyhedral" : cfg.function.builtin,
                    to_string(cfg.policy.kind),
                    std::to_string(cfg.policy.seed),
                    std::to_string(m.last_index),
                    m.status,
                    csv_num(m.final_f),
                    field("values", "tail_oscillation"),
                    field("compensation", "ratio_final"),
                    field("regions", "residual_final"),
                    field("separation", "trend")});
  }
  std::string csv;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) csv += (c ? "," : "") + r[c];
    csv += '\n';
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::string text;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      text += r[c];
      if (c + 1 < r.size()) text += std::string(width[c] - r[c].size() + 2, ' ');
    }
    text += '\n';
  }
  return {csv, text};
}

}  // namespace subgrad::cli

#endif  // SUBGRAD_EXPERIMENT_HPP
