#ifndef SUBGRAD_CONFIG_HPP
#define SUBGRAD_CONFIG_HPP

// Experiment configuration: flat `key = value` lines with dotted sections,
// `#` comments. The key reference is in README.md.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "subgrad/diagnostics.hpp"
#include "subgrad/dynamics.hpp"
#include "subgrad/funcs.hpp"
#include "subgrad/measures.hpp"

namespace subgrad {

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

inline const std::vector<std::string>& diagnostic_names() {
  static const std::vector<std::string> names{
      "global",  "values",   "regions",          "compensation", "essacc", "intervals",
      "separation", "perpendicularity", "circulation", "defect", "centroid"};
  return names;
}

/// Diagnostics that need every iterate of the prefix, not just a thinned record.
inline bool needs_dense(const std::string& diagnostic) { return diagnostic != "values"; }

struct FunctionSpec {
  std::string builtin = "tripod";   // empty for an explicit polyhedral spec
  std::vector<AffinePiece> pieces;  // used when builtin is empty

  friend bool operator==(const FunctionSpec&, const FunctionSpec&) = default;
};

inline OraclePtr make_oracle(const FunctionSpec& spec) {
  if (!spec.builtin.empty()) return make_builtin(spec.builtin);
  return std::make_shared<PolyhedralFunction>(spec.pieces);
}

struct CheckpointParams {
  int per_decade = 4;
  std::size_t first = 1;
  friend bool operator==(const CheckpointParams&, const CheckpointParams&) = default;
};

struct EssAccParams {
  std::optional<Box> box;  // default: the guard box
  std::size_t resolution = 64;
  double tau = kDefaultEssAccThreshold;
  double max_dist = 0.1;
  friend bool operator==(const EssAccParams&, const EssAccParams&) = default;
};

struct CompensationParams {
  Vector center;  // default: origin
  double eta = 0.05;
  double delta = 0.1;
  double max_ratio = 0.1;
  friend bool operator==(const CompensationParams&, const CompensationParams&) = default;
};

struct IntervalParams {
  Vector center;
  double eta = 0.05;
  double delta = 0.1;
  double max_statistic = 0.1;
  friend bool operator==(const IntervalParams&, const IntervalParams&) = default;
};

struct SeparationParams {
  Vector x;
  Vector y;
  double radius = 0.1;
  friend bool operator==(const SeparationParams&, const SeparationParams&) = default;
};

struct PerpendicularityParams {
  Vector center;
  double radius = 0.1;
  std::vector<Vector> tangents;  // empty: the declared stratum through the center
  double tail_fraction = 0.5;
  double min_velocity_norm = 0.0;  // 0: half the median norm
  double max_abs = 0.1;
  friend bool operator==(const PerpendicularityParams&, const PerpendicularityParams&) = default;
};

struct ValueParams {
  std::size_t window = 10000;
  double max_oscillation = 0.01;
  friend bool operator==(const ValueParams&, const ValueParams&) = default;
};

struct RegionParams {
  double max_residual = 0.05;
  friend bool operator==(const RegionParams&, const RegionParams&) = default;
};

struct CirculationParams {
  SelectionPolicy policy{SelectionKind::min_norm, 0};
  std::size_t subsamples = 4;
  CirculationMode mode = CirculationMode::automatic;
  double tolerance = 1e-10;
  friend bool operator==(const CirculationParams&, const CirculationParams&) = default;
};

struct DefectParams {
  int degree = 2;
  std::optional<Box> box;  // default: bounding box of the samples
  friend bool operator==(const DefectParams&, const DefectParams&) = default;
};

struct CentroidParams {
  std::optional<Box> box;  // default: the guard box
  std::size_t resolution = 64;
  friend bool operator==(const CentroidParams&, const CentroidParams&) = default;
};

struct GlobalParams {
  double tolerance = 1e-10;
  friend bool operator==(const GlobalParams&, const GlobalParams&) = default;
};

struct ExperimentConfig {
  std::string name = "run";
  FunctionSpec function;
  Vector x0;
  StepSchedule schedule;
  std::size_t steps = 1000;
  SelectionPolicy policy;
  std::optional<Box> guard;
  std::size_t thin = 0;
  double tol_active = kDefaultActiveTolerance;
  std::vector<std::string> diagnostics;

  CheckpointParams checkpoints;
  GlobalParams global;
  ValueParams values;
  RegionParams regions;
  CompensationParams compensation;
  EssAccParams essacc;
  IntervalParams intervals;
  SeparationParams separation;
  PerpendicularityParams perpendicularity;
  CirculationParams circulation;
  DefectParams defect;
  CentroidParams centroid;

  std::size_t dimension() const { return x0.size(); }
  Box guard_box() const { return guard.value_or(Box::cube(dimension(), -10.0, 10.0)); }
  bool has(const std::string& d) const {
    return std::find(diagnostics.begin(), diagnostics.end(), d) != diagnostics.end();
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline std::string to_string(CirculationMode m) {
  switch (m) {
    case CirculationMode::automatic: return "auto";
    case CirculationMode::midpoint: return "midpoint";
    case CirculationMode::exact: return "exact";
  }
  return "?";
}

inline CirculationMode parse_circulation_mode(const std::string& s) {
  if (s == "auto") return CirculationMode::automatic;
  if (s == "midpoint") return CirculationMode::midpoint;
  if (s == "exact") return CirculationMode::exact;
  throw ConfigError("unknown circulation mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Emission

namespace config_detail {

/// Shortest representation that parses back to the same double.
inline std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string fmt(const Vector& v) {
  std::string out;
  for (std::size_t c = 0; c < v.size(); ++c) {
    if (c) out += ", ";
    out += fmt(v[c]);
  }
  return out;
}

inline std::string fmt(const std::vector<Vector>& rows) {
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r) out += "; ";
    out += fmt(rows[r]);
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto t = trim(s);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& s) {
  Int v = 0;
  const auto t = trim(s);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  return v;
}

inline Vector parse_vector(const std::string& key, const std::string& s) {
  Vector out;
  for (const auto& part : split(s, ',')) out.push_back(parse_double(key, part));
  if (out.empty()) throw ConfigError(key + ": empty vector");
  return out;
}

inline std::vector<Vector> parse_rows(const std::string& key, const std::string& s) {
  std::vector<Vector> out;
  for (const auto& row : split(s, ';')) out.push_back(parse_vector(key, row));
  return out;
}

}  // namespace config_detail

inline std::string emit_config(const ExperimentConfig& c) {
  using config_detail::fmt;
  std::ostringstream os;
  auto kv = [&](const std::string& k, const std::string& v) { os << k << " = " << v << '\n'; };
  auto box = [&](const std::string& prefix, const std::optional<Box>& b) {
    if (!b) return;
    kv(prefix + ".lo", fmt(b->lo));
    kv(prefix + ".hi", fmt(b->hi));
  };
  kv("name", c.name);
  if (!c.function.builtin.empty()) {
    kv("function", c.function.builtin);
  } else {
    kv("function", "polyhedral");
    std::vector<Vector> rows;
    for (const auto& p : c.function.pieces) {
      Vector r = p.gradient;
      r.push_back(p.offset);
      rows.push_back(std::move(r));
    }
    kv("function.pieces", fmt(rows));
  }
  kv("x0", fmt(c.x0));
  kv("steps", std::to_string(c.steps));
  kv("schedule.c", fmt(c.schedule.c));
  kv("schedule.p", fmt(c.schedule.p));
  kv("schedule.offset", std::to_string(c.schedule.offset));
  kv("policy", to_string(c.policy.kind));
  kv("seed", std::to_string(c.policy.seed));
  box("guard", c.guard);
  kv("thin", std::to_string(c.thin));
  kv("tol_active", fmt(c.tol_active));
  std::string list;
  for (std::size_t k = 0; k < c.diagnostics.size(); ++k) list += (k ? ", " : "") + c.diagnostics[k];
  kv("diagnostics", list);

  kv("checkpoints.per_decade", std::to_string(c.checkpoints.per_decade));
  kv("checkpoints.first", std::to_string(c.checkpoints.first));
  kv("global.tolerance", fmt(c.global.tolerance));
  kv("values.window", std::to_string(c.values.window));
  kv("values.max_oscillation", fmt(c.values.max_oscillation));
  kv("regions.max_residual", fmt(c.regions.max_residual));
  if (!c.compensation.center.empty()) kv("compensation.center", fmt(c.compensation.center));
  kv("compensation.eta", fmt(c.compensation.eta));
  kv("compensation.delta", fmt(c.compensation.delta));
  kv("compensation.max_ratio", fmt(c.compensation.max_ratio));
  box("essacc.box", c.essacc.box);
  kv("essacc.resolution", std::to_string(c.essacc.resolution));
  kv("essacc.tau", fmt(c.essacc.tau));
  kv("essacc.max_dist", fmt(c.essacc.max_dist));
  if (!c.intervals.center.empty()) kv("intervals.center", fmt(c.intervals.center));
  kv("intervals.eta", fmt(c.intervals.eta));
  kv("intervals.delta", fmt(c.intervals.delta));
  kv("intervals.max_statistic", fmt(c.intervals.max_statistic));
  if (!c.separation.x.empty()) kv("separation.x", fmt(c.separation.x));
  if (!c.separation.y.empty()) kv("separation.y", fmt(c.separation.y));
  kv("separation.radius", fmt(c.separation.radius));
  if (!c.perpendicularity.center.empty())
    kv("perpendicularity.center", fmt(c.perpendicularity.center));
  kv("perpendicularity.radius", fmt(c.perpendicularity.radius));
  if (!c.perpendicularity.tangents.empty())
    kv("perpendicularity.tangents", fmt(c.perpendicularity.tangents));
  kv("perpendicularity.tail_fraction", fmt(c.perpendicularity.tail_fraction));
  kv("perpendicularity.min_velocity_norm", fmt(c.perpendicularity.min_velocity_norm));
  kv("perpendicularity.max_abs", fmt(c.perpendicularity.max_abs));
  kv("circulation.policy", to_string(c.circulation.policy.kind));
  kv("circulation.seed", std::to_string(c.circulation.policy.seed));
  kv("circulation.subsamples", std::to_string(c.circulation.subsamples));
  kv("circulation.mode", to_string(c.circulation.mode));
  kv("circulation.tolerance", fmt(c.circulation.tolerance));
  kv("defect.degree", std::to_string(c.defect.degree));
  box("defect.box", c.defect.box);
  box("centroid.box", c.centroid.box);
  kv("centroid.resolution", std::to_string(c.centroid.resolution));
  return os.str();
}

// ---------------------------------------------------------------------------
// Parsing

/// Parses the text; every key is optional except `x0`. Unknown and repeated
/// keys are errors.
inline ExperimentConfig parse_config(const std::string& text) {
  using namespace config_detail;
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  for (std::size_t no = 1; std::getline(is, line); ++no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(no) + ": expected 'key = value'");
    const auto key = trim(std::string_view(body).substr(0, eq));
    const auto value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(no) + ": empty key");
    if (!kv.emplace(key, value).second)
      throw ConfigError("line " + std::to_string(no) + ": duplicate key '" + key + "'");
  }

  ExperimentConfig c;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto num = [&](const std::string& key, double& dst) {
    if (auto v = take(key)) dst = parse_double(key, *v);
  };
  auto size = [&](const std::string& key, std::size_t& dst) {
    if (auto v = take(key)) dst = parse_int<std::size_t>(key, *v);
  };
  auto vec = [&](const std::string& key, Vector& dst) {
    if (auto v = take(key)) dst = parse_vector(key, *v);
  };
  auto box = [&](const std::string& prefix, std::optional<Box>& dst) {
    auto lo = take(prefix + ".lo");
    auto hi = take(prefix + ".hi");
    if (!lo && !hi) return;
    if (!lo || !hi) throw ConfigError(prefix + ": both .lo and .hi are required");
    dst = Box{parse_vector(prefix + ".lo", *lo), parse_vector(prefix + ".hi", *hi)};
  };
  auto policy = [&](const std::string& key, SelectionKind& dst) {
    if (auto v = take(key)) {
      try {
        dst = parse_selection_kind(*v);
      } catch (const InputError& e) {
        throw ConfigError(key + ": " + e.what());
      }
    }
  };

  if (auto v = take("name")) c.name = *v;
  if (auto v = take("function")) {
    if (*v == "polyhedral") {
      c.function.builtin.clear();
      const auto rows = take("function.pieces");
      if (!rows) throw ConfigError("function.pieces is required for a polyhedral function");
      for (auto& r : parse_rows("function.pieces", *rows)) {
        if (r.size() < 2) throw ConfigError("function.pieces: each row needs gradient and offset");
        const double offset = r.back();
        r.pop_back();
        c.function.pieces.push_back(AffinePiece{std::move(r), offset});
      }
    } else {
      c.function.builtin = *v;
    }
  }
  const auto x0 = take("x0");
  if (!x0) throw ConfigError("x0 is required");
  c.x0 = parse_vector("x0", *x0);
  size("steps", c.steps);
  num("schedule.c", c.schedule.c);
  num("schedule.p", c.schedule.p);
  if (auto v = take("schedule.offset")) c.schedule.offset = parse_int<std::int64_t>("schedule.offset", *v);
  policy("policy", c.policy.kind);
  if (auto v = take("seed")) c.policy.seed = parse_int<std::uint64_t>("seed", *v);
  box("guard", c.guard);
  size("thin", c.thin);
  num("tol_active", c.tol_active);
  if (auto v = take("diagnostics")) {
    for (const auto& d : split(*v, ','))
      if (!d.empty()) c.diagnostics.push_back(d);
  }

  if (auto v = take("checkpoints.per_decade"))
    c.checkpoints.per_decade = parse_int<int>("checkpoints.per_decade", *v);
  size("checkpoints.first", c.checkpoints.first);
  num("global.tolerance", c.global.tolerance);
  size("values.window", c.values.window);
  num("values.max_oscillation", c.values.max_oscillation);
  num("regions.max_residual", c.regions.max_residual);
  vec("compensation.center", c.compensation.center);
  num("compensation.eta", c.compensation.eta);
  num("compensation.delta", c.compensation.delta);
  num("compensation.max_ratio", c.compensation.max_ratio);
  box("essacc.box", c.essacc.box);
  size("essacc.resolution", c.essacc.resolution);
  num("essacc.tau", c.essacc.tau);
  num("essacc.max_dist", c.essacc.max_dist);
  vec("intervals.center", c.intervals.center);
  num("intervals.eta", c.intervals.eta);
  num("intervals.delta", c.intervals.delta);
  num("intervals.max_statistic", c.intervals.max_statistic);
  vec("separation.x", c.separation.x);
  vec("separation.y", c.separation.y);
  num("separation.radius", c.separation.radius);
  vec("perpendicularity.center", c.perpendicularity.center);
  num("perpendicularity.radius", c.perpendicularity.radius);
  if (auto v = take("perpendicularity.tangents"))
    c.perpendicularity.tangents = parse_rows("perpendicularity.tangents", *v);
  num("perpendicularity.tail_fraction", c.perpendicularity.tail_fraction);
  num("perpendicularity.min_velocity_norm", c.perpendicularity.min_velocity_norm);
  num("perpendicularity.max_abs", c.perpendicularity.max_abs);
  policy("circulation.policy", c.circulation.policy.kind);
  if (auto v = take("circulation.seed"))
    c.circulation.policy.seed = parse_int<std::uint64_t>("circulation.seed", *v);
  size("circulation.subsamples", c.circulation.subsamples);
  if (auto v = take("circulation.mode")) c.circulation.mode = parse_circulation_mode(*v);
  num("circulation.tolerance", c.circulation.tolerance);
  if (auto v = take("defect.degree")) c.defect.degree = parse_int<int>("defect.degree", *v);
  box("defect.box", c.defect.box);
  box("centroid.box", c.centroid.box);
  size("centroid.resolution", c.centroid.resolution);

  if (!kv.empty()) throw ConfigError("unknown key '" + kv.begin()->first + "'");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Validation

inline Vector center_or_origin(const Vector& c, std::size_t n) {
  return c.empty() ? Vector(n, 0.0) : c;
}

/// Structural checks: known names, consistent dimensions, parameter ranges.
/// Errors carry the name of the offending section.
inline void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  };
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos || c.name == "." ||
      c.name == "..")
    fail("name", "must be a plain non-empty file name");
  OraclePtr oracle;
  try {
    oracle = make_oracle(c.function);
  } catch (const InputError& e) {
    fail("function", e.what());
  }
  const std::size_t n = oracle->dimension();
  auto dim = [&](const std::string& where, const Vector& v) {
    if (!v.empty() && v.size() != n)
      fail(where, "dimension " + std::to_string(v.size()) + " does not match the function (" +
                      std::to_string(n) + ")");
  };
  if (c.x0.empty()) fail("x0", "required");
  dim("x0", c.x0);
  if (!all_finite(c.x0)) fail("x0", "must be finite");
  try {
    c.schedule.validate();
  } catch (const InputError& e) {
    fail("schedule", e.what());
  }
  if (c.steps < 1) fail("steps", "must be >= 1");
  auto check_box = [&](const std::string& where, const std::optional<Box>& b) {
    if (!b) return;
    dim(where + ".lo", b->lo);
    dim(where + ".hi", b->hi);
    try {
      b->validate();
    } catch (const InputError& e) {
      fail(where, e.what());
    }
  };
  check_box("guard", c.guard);
  if (!(c.tol_active >= 0.0)) fail("tol_active", "must be >= 0");
  std::vector<std::string> seen;
  for (const auto& d : c.diagnostics) {
    const auto& names = diagnostic_names();
    if (std::find(names.begin(), names.end(), d) == names.end())
      fail("diagnostics", "unknown diagnostic '" + d + "'");
    if (std::find(seen.begin(), seen.end(), d) != seen.end())
      fail("diagnostics", "'" + d + "' listed twice");
    seen.push_back(d);
  }
  if (c.checkpoints.per_decade < 1) fail("checkpoints", "per_decade must be >= 1");
  if (c.checkpoints.first < 1 || c.checkpoints.first > c.steps)
    fail("checkpoints", "first must lie in [1, steps]");

  if (c.has("values")) {
    if (c.values.window < 1 || c.values.window > c.steps)
      fail("values", "window must lie in [1, steps]");
  }
  if (c.has("compensation")) {
    dim("compensation.center", c.compensation.center);
    if (!(c.compensation.eta > 0.0 && c.compensation.delta > c.compensation.eta))
      fail("compensation", "need 0 < eta < delta");
  }
  if (c.has("essacc")) {
    check_box("essacc.box", c.essacc.box);
    if (c.essacc.resolution < 1) fail("essacc", "resolution must be >= 1");
    if (!(c.essacc.tau > 0.0 && c.essacc.tau < 1.0)) fail("essacc", "tau must lie in (0, 1)");
  }
  if (c.has("intervals")) {
    dim("intervals.center", c.intervals.center);
    if (!(c.intervals.eta > 0.0 && c.intervals.delta > c.intervals.eta))
      fail("intervals", "need 0 < eta < delta");
  }
  if (c.has("separation")) {
    if (c.separation.x.empty() || c.separation.y.empty()) fail("separation", "x and y are required");
    dim("separation.x", c.separation.x);
    dim("separation.y", c.separation.y);
    try {
      validate_separation_balls(Ball{c.separation.x, c.separation.radius},
                                Ball{c.separation.y, c.separation.radius}, n);
    } catch (const InputError& e) {
      fail("separation", e.what());
    }
  }
  if (c.has("perpendicularity")) {
    const auto& p = c.perpendicularity;
    dim("perpendicularity.center", p.center);
    for (const auto& w : p.tangents) {
      dim("perpendicularity.tangents", w);
      if (std::abs(norm(w) - 1.0) > 1e-9) fail("perpendicularity", "tangents must be unit vectors");
    }
    if (!(p.radius > 0.0)) fail("perpendicularity", "radius must be positive");
    if (!(p.tail_fraction > 0.0 && p.tail_fraction <= 1.0))
      fail("perpendicularity", "tail_fraction must lie in (0, 1]");
    if (!(p.min_velocity_norm >= 0.0)) fail("perpendicularity", "min_velocity_norm must be >= 0");
  }
  if (c.has("circulation")) {
    if (c.circulation.subsamples < 1) fail("circulation", "subsamples must be >= 1");
    if (c.circulation.mode == CirculationMode::exact && oracle->as_polyhedral() == nullptr)
      fail("circulation", "exact mode requires a polyhedral function");
  }
  if (c.has("defect")) {
    if (c.defect.degree < 1) fail("defect", "degree must be >= 1");
    check_box("defect.box", c.defect.box);
  }
  if (c.has("centroid")) {
    if (c.centroid.resolution < 1) fail("centroid", "resolution must be >= 1");
    check_box("centroid.box", c.centroid.box);
  }
}

}  // namespace subgrad

#endif  // SUBGRAD_CONFIG_HPP
