#ifndef SUBGRAD_MEASURES_HPP
#define SUBGRAD_MEASURES_HPP

// Empirical position-velocity measures of the interpolating curve, their
// binned centroid fields, closedness defect, and the circulation of a
// subgradient selection along the curve.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "subgrad/dynamics.hpp"
#include "subgrad/funcs.hpp"
#include "subgrad/selection.hpp"

namespace subgrad {

/// Weighted samples (x, v, w) of a measure on R^n x R^n.
class EmpiricalPhaseMeasure {
 public:
  explicit EmpiricalPhaseMeasure(std::size_t dimension) : n_(dimension) {}

  void add(ConstView x, ConstView v, double w) {
    require_dimension(x, n_, "phase sample position");
    require_dimension(v, n_, "phase sample velocity");
    if (!(w > 0.0)) throw InputError("phase sample weight must be positive");
    positions_.insert(positions_.end(), x.begin(), x.end());
    velocities_.insert(velocities_.end(), v.begin(), v.end());
    weights_.push_back(w);
    total_.add(w);
  }

  std::size_t dimension() const { return n_; }
  std::size_t size() const { return weights_.size(); }
  ConstView position(std::size_t k) const { return ConstView(positions_).subspan(k * n_, n_); }
  ConstView velocity(std::size_t k) const { return ConstView(velocities_).subspan(k * n_, n_); }
  double weight(std::size_t k) const { return weights_[k]; }
  double total_weight() const { return total_.value(); }

  /// Integral of phi(x, v) against the normalized (mass one) measure.
  template <class Phi>
  double integrate(Phi&& phi) const {
    CompensatedSum s;
    for (std::size_t k = 0; k < size(); ++k) s.add(weights_[k] * phi(position(k), velocity(k)));
    return s.value() / total_weight();
  }

  Box bounding_box() const {
    Box b{Vector(n_, std::numeric_limits<double>::infinity()),
          Vector(n_, -std::numeric_limits<double>::infinity())};
    for (std::size_t k = 0; k < size(); ++k)
      for (std::size_t c = 0; c < n_; ++c) {
        b.lo[c] = std::min(b.lo[c], position(k)[c]);
        b.hi[c] = std::max(b.hi[c], position(k)[c]);
      }
    return b;
  }

 private:
  std::size_t n_;
  std::vector<double> positions_;
  std::vector<double> velocities_;
  std::vector<double> weights_;
  CompensatedSum total_;
};

/// mu_{gamma,B}: one sample (x_i, -v_i, eps_i) per iterate i in B.
///
/// The interpolating curve has derivative -v_i on [t_i, t_{i+1}); the sample
/// sits at the left endpoint x_i.
inline EmpiricalPhaseMeasure phase_measure(const Trajectory& traj,
                                           const std::vector<std::size_t>& indices) {
  traj.require_dense("phase_measure");
  if (indices.empty()) throw InputError("phase_measure: empty index set");
  EmpiricalPhaseMeasure mu(traj.dimension());
  Vector minus_v(traj.dimension());
  for (std::size_t i : indices) {
    if (i > traj.last_index()) throw InputError("phase_measure: index beyond trajectory");
    for (std::size_t c = 0; c < minus_v.size(); ++c) minus_v[c] = -traj.velocity(i)[c];
    mu.add(traj.point(i), minus_v, traj.step(i));
  }
  return mu;
}

/// Same as above for the contiguous index range [first, last].
inline EmpiricalPhaseMeasure phase_measure(const Trajectory& traj, std::size_t first,
                                           std::size_t last) {
  traj.require_dense("phase_measure");
  if (first > last || last > traj.last_index())
    throw InputError("phase_measure: invalid index range");
  EmpiricalPhaseMeasure mu(traj.dimension());
  Vector minus_v(traj.dimension());
  for (std::size_t i = first; i <= last; ++i) {
    for (std::size_t c = 0; c < minus_v.size(); ++c) minus_v[c] = -traj.velocity(i)[c];
    mu.add(traj.point(i), minus_v, traj.step(i));
  }
  return mu;
}

/// Unit-speed measure of the polygon through `vertices` (closed when the
/// last vertex equals the first), sampled at Gauss-Legendre nodes so that
/// line integrals of polynomials of degree < 2*nodes are exact.
inline EmpiricalPhaseMeasure polygon_measure(const std::vector<Vector>& vertices,
                                             int nodes = 3) {
  if (vertices.size() < 2) throw InputError("polygon_measure: need two vertices");
  static const std::vector<std::vector<std::pair<double, double>>> rules{
      {{0.0, 2.0}},
      {{-0.5773502691896257645, 1.0}, {0.5773502691896257645, 1.0}},
      {{-0.7745966692414833770, 5.0 / 9.0}, {0.0, 8.0 / 9.0},
       {0.7745966692414833770, 5.0 / 9.0}},
      {{-0.8611363115940525752, 0.3478548451374538574},
       {-0.3399810435848562648, 0.6521451548625461426},
       {0.3399810435848562648, 0.6521451548625461426},
       {0.8611363115940525752, 0.3478548451374538574}}};
  if (nodes < 1 || nodes > 4) throw InputError("polygon_measure: nodes must be in [1, 4]");
  const auto& rule = rules[static_cast<std::size_t>(nodes - 1)];
  const std::size_t n = vertices.front().size();
  EmpiricalPhaseMeasure mu(n);
  for (std::size_t s = 0; s + 1 < vertices.size(); ++s) {
    const Vector d = vertices[s + 1] - vertices[s];
    const double len = norm(d);
    if (len == 0.0) continue;
    const Vector u = scaled(d, 1.0 / len);
    for (const auto& [node, w] : rule) {
      const double a = 0.5 * (node + 1.0);
      Vector x(n);
      for (std::size_t c = 0; c < n; ++c) x[c] = vertices[s][c] + a * d[c];
      mu.add(x, u, 0.5 * w * len);
    }
  }
  return mu;
}

// ---------------------------------------------------------------------------

/// Uniform grid of resolution^n cells over a box; points outside fall into
/// a single overflow cell.
struct GridSpec {
  Box box;
  std::size_t resolution = 64;

  void validate() const {
    box.validate();
    if (resolution < 1) throw InputError("grid: resolution must be >= 1");
  }

  std::size_t dimension() const { return box.dimension(); }
  double width(std::size_t c) const {
    return (box.hi[c] - box.lo[c]) / static_cast<double>(resolution);
  }
  double diagonal() const {
    double s = 0.0;
    for (std::size_t c = 0; c < dimension(); ++c) s += width(c) * width(c);
    return std::sqrt(s);
  }

  /// Linear cell index, or nullopt outside the box. The upper faces belong
  /// to the last cell.
  std::optional<std::size_t> cell_of(ConstView x) const {
    std::size_t lin = 0;
    for (std::size_t c = dimension(); c-- > 0;) {
      if (!(x[c] >= box.lo[c] && x[c] <= box.hi[c])) return std::nullopt;
      auto j = static_cast<std::size_t>(std::floor((x[c] - box.lo[c]) / width(c)));
      j = std::min(j, resolution - 1);
      lin = lin * resolution + j;
    }
    return lin;
  }

  std::vector<std::size_t> multi_index(std::size_t lin) const {
    std::vector<std::size_t> out(dimension());
    for (std::size_t c = 0; c < dimension(); ++c) {
      out[c] = lin % resolution;
      lin /= resolution;
    }
    return out;
  }

  Vector center(std::size_t lin) const {
    const auto ix = multi_index(lin);
    Vector out(dimension());
    for (std::size_t c = 0; c < dimension(); ++c)
      out[c] = box.lo[c] + (static_cast<double>(ix[c]) + 0.5) * width(c);
    return out;
  }
};

struct CellStats {
  double mass = 0.0;
  Vector velocity_sum;  // sum w * v
  Vector position_sum;  // sum w * x
  std::size_t count = 0;

  void add(ConstView x, ConstView v, double w) {
    if (velocity_sum.empty()) {
      velocity_sum.assign(v.size(), 0.0);
      position_sum.assign(x.size(), 0.0);
    }
    mass += w;
    for (std::size_t c = 0; c < v.size(); ++c) {
      velocity_sum[c] += w * v[c];
      position_sum[c] += w * x[c];
    }
    ++count;
  }

  Vector centroid() const { return mass > 0.0 ? scaled(velocity_sum, 1.0 / mass) : velocity_sum; }
  Vector mean_position() const {
    return mass > 0.0 ? scaled(position_sum, 1.0 / mass) : position_sum;
  }
};

/// Binned surrogate for the disintegration of a phase measure: per cell
/// time mass and mean velocity.
struct GridField {
  GridSpec spec;
  std::map<std::size_t, CellStats> cells;
  CellStats overflow;

  double total_mass() const {
    CompensatedSum s;
    for (const auto& [_, c] : cells) s.add(c.mass);
    s.add(overflow.mass);
    return s.value();
  }

  /// Mass-weighted mean of ||vbar_c|| over in-box cells.
  double mean_centroid_norm() const {
    double num = 0.0, den = 0.0;
    for (const auto& [_, c] : cells) {
      num += c.mass * norm(c.centroid());
      den += c.mass;
    }
    return den > 0.0 ? num / den : 0.0;
  }

  void write_csv(std::ostream& os) const {
    const std::size_t n = spec.dimension();
    for (std::size_t c = 0; c < n; ++c) os << "cell_ix" << c << ',';
    os << "mass,";
    for (std::size_t c = 0; c < n; ++c) os << "vbar" << c << ',';
    os << "count\n";
    os << std::setprecision(17);
    auto row = [&](const std::vector<long long>& ix, const CellStats& s) {
      for (auto j : ix) os << j << ',';
      os << s.mass << ',';
      const Vector vb = s.velocity_sum.empty() ? Vector(n, 0.0) : s.centroid();
      for (double x : vb) os << x << ',';
      os << s.count << '\n';
    };
    for (const auto& [lin, s] : cells) {
      const auto mi = spec.multi_index(lin);
      row(std::vector<long long>(mi.begin(), mi.end()), s);
    }
    if (overflow.count > 0) row(std::vector<long long>(n, -1), overflow);
  }
};

inline GridField centroid_field(const EmpiricalPhaseMeasure& mu, const Box& box,
                                std::size_t resolution) {
  GridField g{GridSpec{box, resolution}, {}, {}};
  g.spec.validate();
  require_dimension(box.lo, mu.dimension(), "centroid_field: box");
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const auto cell = g.spec.cell_of(mu.position(k));
    CellStats& s = cell ? g.cells[*cell] : g.overflow;
    s.add(mu.position(k), mu.velocity(k), mu.weight(k));
  }
  return g;
}

// ---------------------------------------------------------------------------

struct DefectTerm {
  std::vector<int> powers;
  double normalizer = 1.0;  // max ||grad phi|| on the box before scaling
  double value = 0.0;       // |int grad(phi)/normalizer . v dmu|
};

struct DefectReport {
  int degree = 1;
  Box box;
  std::vector<DefectTerm> terms;
  double defect = 0.0;

  std::string to_text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "closedness defect (degree " << degree << "): " << defect << '\n';
    for (const auto& t : terms) {
      os << "  phi = ";
      bool first = true;
      for (std::size_t c = 0; c < t.powers.size(); ++c) {
        if (t.powers[c] == 0) continue;
        if (!first) os << '*';
        os << 'x' << c;
        if (t.powers[c] > 1) os << '^' << t.powers[c];
        first = false;
      }
      os << "  scale " << t.normalizer << "  value " << t.value << '\n';
    }
    return os.str();
  }
};

namespace detail {

inline void enumerate_monomials(std::size_t n, int degree, std::vector<int>& cur, std::size_t pos,
                                int used, std::vector<std::vector<int>>& out) {
  if (pos == n) {
    if (used >= 1) out.push_back(cur);
    return;
  }
  for (int p = 0; used + p <= degree; ++p) {
    cur[pos] = p;
    enumerate_monomials(n, degree, cur, pos + 1, used + p, out);
  }
  cur[pos] = 0;
}

inline Vector monomial_gradient(const std::vector<int>& powers, ConstView x) {
  Vector g(powers.size(), 0.0);
  for (std::size_t d = 0; d < powers.size(); ++d) {
    if (powers[d] == 0) continue;
    double m = powers[d];
    for (std::size_t k = 0; k < powers.size(); ++k)
      m *= std::pow(x[k], k == d ? powers[k] - 1 : powers[k]);
    g[d] = m;
  }
  return g;
}

}  // namespace detail

/// All monomials of total degree 1..degree in n variables.
inline std::vector<std::vector<int>> monomial_powers(std::size_t n, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  detail::enumerate_monomials(n, degree, cur, 0, 0, out);
  return out;
}

/// max over monomials phi of degree <= d, scaled so max ||grad phi|| = 1 on
/// the box, of |int grad phi(x) . v dmu|. Zero for closed measures.
///
/// The box defaults to the bounding box of the sample positions. Monomials
/// whose gradient vanishes on the whole box are skipped.
inline DefectReport closedness_defect(const EmpiricalPhaseMeasure& mu, int degree,
                                      std::optional<Box> box = std::nullopt) {
  if (degree < 1) throw InputError("closedness_defect: degree must be >= 1");
  if (mu.size() == 0) throw InputError("closedness_defect: empty measure");
  DefectReport rep;
  rep.degree = degree;
  rep.box = box.value_or(mu.bounding_box());
  const std::size_t n = mu.dimension();
  // Each partial derivative of a monomial is monotone in every |x_k|, so
  // ||grad phi|| peaks at the box point of largest absolute coordinates.
  Vector far(n);
  for (std::size_t c = 0; c < n; ++c)
    far[c] = std::max(std::abs(rep.box.lo[c]), std::abs(rep.box.hi[c]));
  for (const auto& powers : monomial_powers(n, degree)) {
    const double scale = norm(detail::monomial_gradient(powers, far));
    if (!(scale > 0.0)) continue;
    const double integral = mu.integrate([&](ConstView x, ConstView v) {
      return dot(detail::monomial_gradient(powers, x), v);
    });
    DefectTerm t{powers, scale, std::abs(integral) / scale};
    rep.defect = std::max(rep.defect, t.value);
    rep.terms.push_back(std::move(t));
  }
  return rep;
}

// ---------------------------------------------------------------------------

enum class CirculationMode { automatic, midpoint, exact };

struct CirculationResult {
  double integral = 0.0;   // I_sigma
  double reference = 0.0;  // (f(x_N) - f(x_0)) / T
  double elapsed = 0.0;    // T = sum_{i<N} eps_i
  CirculationMode mode = CirculationMode::midpoint;
  std::size_t pieces = 0;  // integration cells used
};

namespace detail {

// Breakpoints in [0, 1] of the upper envelope of a_j + s b_j.
inline std::vector<double> envelope_breaks(const std::vector<double>& a,
                                           const std::vector<double>& b) {
  const std::size_t m = a.size();
  auto better = [&](std::size_t j, std::size_t k) {
    if (a[j] != a[k]) return a[j] > a[k];
    return b[j] > b[k];
  };
  std::size_t cur = 0;
  for (std::size_t j = 1; j < m; ++j)
    if (better(j, cur)) cur = j;
  std::vector<double> breaks{0.0};
  double s = 0.0;
  for (std::size_t guard = 0; guard <= m; ++guard) {
    double next = 1.0;
    std::size_t who = cur;
    for (std::size_t j = 0; j < m; ++j) {
      if (b[j] <= b[cur]) continue;
      const double cross = (a[cur] - a[j]) / (b[j] - b[cur]);
      if (cross > s && (cross < next || (cross == next && b[j] > b[who]))) {
        next = cross;
        who = j;
      }
    }
    if (next >= 1.0 || who == cur) break;
    breaks.push_back(next);
    s = next;
    cur = who;
  }
  breaks.push_back(1.0);
  return breaks;
}

}  // namespace detail

/// Circulation of a subgradient selection sigma (drawn by `policy2`) along
/// the interpolating curve over segments i < N:
///   I = (1/T) sum_i int_segment sigma(x) . dx,  T = sum_{i<N} eps_i.
/// The chain rule makes I equal (f(x_N) - f(x_0)) / T for every selection.
///
/// Midpoint mode samples sigma at m interior points of each segment with
/// weight eps_i/m against -v_i. Exact mode (polyhedral oracles only) splits
/// each segment where the active piece changes and evaluates sigma with
/// exact membership in the middle of every sub-segment.
inline CirculationResult circulation(const Trajectory& traj, const FunctionOracle& oracle,
                                     const SelectionPolicy& policy2, std::size_t m = 4,
                                     CirculationMode mode = CirculationMode::automatic,
                                     double tol_active = kDefaultActiveTolerance) {
  traj.require_dense("circulation");
  if (m < 1) throw InputError("circulation: subsamples per step must be >= 1");
  if (traj.dimension() != oracle.dimension())
    throw InputError("circulation: oracle dimension does not match trajectory");
  if (traj.size() < 2) throw InputError("circulation: need at least one segment");
  const PolyhedralFunction* poly = oracle.as_polyhedral();
  if (mode == CirculationMode::automatic)
    mode = poly != nullptr ? CirculationMode::exact : CirculationMode::midpoint;
  if (mode == CirculationMode::exact && poly == nullptr)
    throw InputError("circulation: exact mode requires a polyhedral oracle");

  const std::size_t n = traj.dimension();
  Selector sigma(policy2);
  CompensatedSum integral, elapsed;
  CirculationResult res;
  res.mode = mode;
  Vector x(n), d(n);
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    elapsed.add(traj.step(i));
    const ConstView a = traj.point(i);
    const ConstView b = traj.point(i + 1);
    for (std::size_t c = 0; c < n; ++c) d[c] = b[c] - a[c];
    if (mode == CirculationMode::midpoint) {
      const ConstView v = traj.velocity(i);
      for (std::size_t k = 0; k < m; ++k) {
        const double s = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
        for (std::size_t c = 0; c < n; ++c) x[c] = a[c] + s * d[c];
        const Vector g = sigma.select(oracle.subdifferential(x, tol_active));
        integral.add(-(traj.step(i) / static_cast<double>(m)) * dot(g, v));
        ++res.pieces;
      }
    } else {
      const auto& pieces = poly->pieces();
      std::vector<double> av(pieces.size()), bv(pieces.size());
      for (std::size_t j = 0; j < pieces.size(); ++j) {
        av[j] = pieces[j](a);
        bv[j] = dot(pieces[j].gradient, d);
      }
      const auto breaks = detail::envelope_breaks(av, bv);
      for (std::size_t q = 0; q + 1 < breaks.size(); ++q) {
        const double len = breaks[q + 1] - breaks[q];
        if (len <= 0.0) continue;
        const double mid = 0.5 * (breaks[q] + breaks[q + 1]);
        for (std::size_t c = 0; c < n; ++c) x[c] = a[c] + mid * d[c];
        const Vector g = sigma.select(poly->subdifferential(x, 0.0));
        integral.add(len * dot(g, d));
        ++res.pieces;
      }
    }
  }
  res.elapsed = elapsed.value();
  res.integral = integral.value() / res.elapsed;
  res.reference = (traj.value(traj.size() - 1) - traj.value(0)) / res.elapsed;
  return res;
}

}  // namespace subgrad

#endif  // SUBGRAD_MEASURES_HPP
