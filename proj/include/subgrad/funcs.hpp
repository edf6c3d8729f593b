#ifndef SUBGRAD_FUNCS_HPP
#define SUBGRAD_FUNCS_HPP

// Path-differentiable test functions with exact Clarke subdifferential
// oracles: max-affine (polyhedral) functions and additive combinations of
// polynomials and absolute values of polynomials.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subgrad/hull.hpp"
#include "subgrad/linalg.hpp"

namespace subgrad {

inline constexpr double kDefaultActiveTolerance = 1e-9;

class PolyhedralFunction;

/// An affine subspace point + span(tangents) declared as a stratum of f.
struct Stratum {
  std::string label;
  Vector point;
  std::vector<Vector> tangents;  // orthonormal; empty for a point stratum

  std::size_t dimension() const { return tangents.size(); }

  double distance_to(ConstView x) const {
    Vector r = Vector(x.begin(), x.end()) - point;
    for (const auto& t : tangents) {
      const double c = dot(r, t);
      for (std::size_t k = 0; k < r.size(); ++k) r[k] -= c * t[k];
    }
    return norm(r);
  }
};

/// Value and Clarke subdifferential oracle of a path-differentiable function.
///
/// Implementations are immutable after construction and may be shared
/// across threads.
class FunctionOracle {
 public:
  virtual ~FunctionOracle() = default;

  virtual std::size_t dimension() const = 0;
  virtual double value(ConstView x) const = 0;

  /// conv of the gradients active within tol_active*(1+|f(x)|) at x.
  virtual SubdiffDescription subdifferential(ConstView x, double tol_active) const = 0;

  /// Gradients of the pieces that can be active somewhere in B_radius(x),
  /// to first order. This is the subdifferential seen at resolution
  /// `radius` and reduces to the exact one as radius -> 0.
  virtual SubdiffDescription subdifferential_within(ConstView x, double radius) const = 0;

  /// Non-null when f is max-affine; enables exact segment integration.
  virtual const PolyhedralFunction* as_polyhedral() const { return nullptr; }

  const std::string& id() const { return id_; }
  std::optional<double> lipschitz_bound() const { return lipschitz_; }
  const std::optional<Box>& lipschitz_box() const { return lipschitz_box_; }
  const std::vector<Stratum>& strata() const { return strata_; }

  void set_id(std::string id) { id_ = std::move(id); }
  void declare_lipschitz(double bound, std::optional<Box> box = std::nullopt) {
    lipschitz_ = bound;
    lipschitz_box_ = std::move(box);
  }
  void declare_strata(std::vector<Stratum> strata) { strata_ = std::move(strata); }

  /// Lowest-dimensional declared stratum whose affine span contains x.
  const Stratum* stratum_containing(ConstView x, double tol = 1e-9) const {
    const Stratum* best = nullptr;
    for (const auto& s : strata_) {
      if (s.distance_to(x) > tol) continue;
      if (best == nullptr || s.dimension() < best->dimension()) best = &s;
    }
    return best;
  }

 private:
  std::string id_ = "anonymous";
  std::optional<double> lipschitz_;
  std::optional<Box> lipschitz_box_;
  std::vector<Stratum> strata_;
};

using OraclePtr = std::shared_ptr<const FunctionOracle>;

inline double eval(const FunctionOracle& oracle, ConstView x) {
  require_dimension(x, oracle.dimension(), "eval");
  return oracle.value(x);
}

inline SubdiffDescription subdifferential(const FunctionOracle& oracle, ConstView x,
                                          double tol_active = kDefaultActiveTolerance) {
  require_dimension(x, oracle.dimension(), "subdifferential");
  if (!(tol_active >= 0.0)) throw InputError("subdifferential: tol_active must be >= 0");
  if (!all_finite(x)) throw InputError("subdifferential: x is not finite");
  return oracle.subdifferential(x, tol_active);
}

// ---------------------------------------------------------------------------

struct AffinePiece {
  Vector gradient;
  double offset = 0.0;

  double operator()(ConstView x) const { return dot(gradient, x) + offset; }
  friend bool operator==(const AffinePiece&, const AffinePiece&) = default;
};

/// f(x) = max_j (g_j . x + b_j).
class PolyhedralFunction final : public FunctionOracle {
 public:
  explicit PolyhedralFunction(std::vector<AffinePiece> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw InputError("polyhedral function needs at least one piece");
    const std::size_t n = pieces_.front().gradient.size();
    if (n == 0) throw InputError("polyhedral function: zero-dimensional gradient");
    double lip = 0.0;
    for (const auto& p : pieces_) {
      if (p.gradient.size() != n) throw InputError("polyhedral function: ragged gradients");
      if (!all_finite(p.gradient) || !std::isfinite(p.offset))
        throw InputError("polyhedral function: non-finite piece");
      lip = std::max(lip, norm(p.gradient));
    }
    declare_lipschitz(lip);
    set_id("polyhedral");
  }

  std::size_t dimension() const override { return pieces_.front().gradient.size(); }
  const std::vector<AffinePiece>& pieces() const { return pieces_; }
  const PolyhedralFunction* as_polyhedral() const override { return this; }

  double value(ConstView x) const override {
    double m = pieces_.front()(x);
    for (std::size_t j = 1; j < pieces_.size(); ++j) m = std::max(m, pieces_[j](x));
    return m;
  }

  /// Indices of pieces within tol*(1+|f(x)|) of the max, in piece order.
  std::vector<std::size_t> active_pieces(ConstView x, double tol_active) const {
    std::vector<double> vals(pieces_.size());
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pieces_.size(); ++j) {
      vals[j] = pieces_[j](x);
      m = std::max(m, vals[j]);
    }
    const double band = tol_active * (1.0 + std::abs(m));
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < pieces_.size(); ++j)
      if (vals[j] >= m - band) out.push_back(j);
    return out;
  }

  /// Index of the first active piece; the region containing x.
  std::size_t region(ConstView x, double tol_active = kDefaultActiveTolerance) const {
    return active_pieces(x, tol_active).front();
  }

  SubdiffDescription subdifferential(ConstView x, double tol_active) const override {
    return from_indices(active_pieces(x, tol_active));
  }

  SubdiffDescription subdifferential_within(ConstView x, double radius) const override {
    std::vector<double> vals(pieces_.size());
    std::size_t top = 0;
    for (std::size_t j = 0; j < pieces_.size(); ++j) {
      vals[j] = pieces_[j](x);
      if (vals[j] > vals[top]) top = j;
    }
    const double slack = 1e-12 * (1.0 + std::abs(vals[top]));
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < pieces_.size(); ++j) {
      const double reach = radius * distance(pieces_[j].gradient, pieces_[top].gradient);
      if (vals[top] - vals[j] <= reach + slack) idx.push_back(j);
    }
    return from_indices(idx);
  }

 private:
  SubdiffDescription from_indices(const std::vector<std::size_t>& idx) const {
    std::vector<Vector> vs;
    for (std::size_t j : idx) {
      const Vector& g = pieces_[j].gradient;
      if (std::find(vs.begin(), vs.end(), g) == vs.end()) vs.push_back(g);
    }
    return SubdiffDescription::hull(std::move(vs));
  }

  std::vector<AffinePiece> pieces_;
};

// ---------------------------------------------------------------------------

struct Monomial {
  double coefficient = 0.0;
  std::vector<int> powers;
};

class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(std::size_t n, std::vector<Monomial> terms) : n_(n), terms_(std::move(terms)) {
    for (const auto& t : terms_)
      if (t.powers.size() != n_) throw InputError("polynomial: monomial arity mismatch");
  }

  std::size_t dimension() const { return n_; }

  double value(ConstView x) const {
    double s = 0.0;
    for (const auto& t : terms_) {
      double m = t.coefficient;
      for (std::size_t k = 0; k < n_; ++k) m *= std::pow(x[k], t.powers[k]);
      s += m;
    }
    return s;
  }

  Vector gradient(ConstView x) const {
    Vector g(n_, 0.0);
    for (const auto& t : terms_) {
      for (std::size_t d = 0; d < n_; ++d) {
        if (t.powers[d] == 0) continue;
        double m = t.coefficient * t.powers[d];
        for (std::size_t k = 0; k < n_; ++k)
          m *= std::pow(x[k], k == d ? t.powers[k] - 1 : t.powers[k]);
        g[d] += m;
      }
    }
    return g;
  }

 private:
  std::size_t n_ = 0;
  std::vector<Monomial> terms_;
};

/// One additive term: weight * p(x) or weight * |p(x)|.
struct CompositeTerm {
  double weight = 1.0;
  Polynomial poly;
  bool absolute = false;
};

/// f(x) = sum_k w_k * p_k(x) or w_k * |p_k(x)|.
///
/// The sum rule holds with equality because each |p_k| is Clarke regular,
/// so the subdifferential is the smooth gradient plus the Minkowski sum of
/// the segments [-|w_k| grad p_k, |w_k| grad p_k] over vanishing p_k.
class CompositeMaxFunction final : public FunctionOracle {
 public:
  CompositeMaxFunction(std::size_t n, std::vector<CompositeTerm> terms)
      : n_(n), terms_(std::move(terms)) {
    if (n_ == 0) throw InputError("composite function: zero dimension");
    for (const auto& t : terms_)
      if (t.poly.dimension() != n_) throw InputError("composite function: term arity mismatch");
    set_id("composite");
  }

  std::size_t dimension() const override { return n_; }

  double value(ConstView x) const override {
    double s = 0.0;
    for (const auto& t : terms_) {
      const double p = t.poly.value(x);
      s += t.weight * (t.absolute ? std::abs(p) : p);
    }
    return s;
  }

  SubdiffDescription subdifferential(ConstView x, double tol_active) const override {
    const double band = tol_active * (1.0 + std::abs(value(x)));
    return assemble(x, [&](const CompositeTerm& t, double p, const Vector&) {
      return std::abs(t.weight * p) <= band;
    });
  }

  SubdiffDescription subdifferential_within(ConstView x, double radius) const override {
    return assemble(x, [&](const CompositeTerm&, double p, const Vector& g) {
      return std::abs(p) <= radius * norm(g) + 1e-15;
    });
  }

 private:
  template <class Active>
  SubdiffDescription assemble(ConstView x, Active&& is_active) const {
    Vector base(n_, 0.0);
    std::vector<Vector> generators;
    for (const auto& t : terms_) {
      const double p = t.poly.value(x);
      const Vector g = t.poly.gradient(x);
      if (!t.absolute) {
        for (std::size_t k = 0; k < n_; ++k) base[k] += t.weight * g[k];
      } else if (is_active(t, p, g)) {
        generators.push_back(scaled(g, std::abs(t.weight)));
      } else {
        const double s = p > 0.0 ? t.weight : -t.weight;
        for (std::size_t k = 0; k < n_; ++k) base[k] += s * g[k];
      }
    }
    if (generators.empty()) return SubdiffDescription::single(std::move(base));
    // Sign patterns, all-plus first.
    std::vector<Vector> vs;
    const std::size_t m = generators.size();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
      Vector v = base;
      for (std::size_t j = 0; j < m; ++j) {
        const double s = (mask >> j) & 1U ? -1.0 : 1.0;
        for (std::size_t k = 0; k < n_; ++k) v[k] += s * generators[j][k];
      }
      if (std::find(vs.begin(), vs.end(), v) == vs.end()) vs.push_back(std::move(v));
    }
    return SubdiffDescription::hull(std::move(vs));
  }

  std::size_t n_;
  std::vector<CompositeTerm> terms_;
};

// ---------------------------------------------------------------------------
// Built-in catalog.

/// max(-2x, x+y, x-y); unique minimizer at the origin with three strata
/// meeting there.
inline std::shared_ptr<PolyhedralFunction> make_tripod() {
  auto f = std::make_shared<PolyhedralFunction>(std::vector<AffinePiece>{
      {{-2.0, 0.0}, 0.0}, {{1.0, 1.0}, 0.0}, {{1.0, -1.0}, 0.0}});
  f->set_id("tripod");
  const double r = 1.0 / std::sqrt(10.0);
  f->declare_strata({
      {"origin", {0.0, 0.0}, {}},
      {"ray12", {0.0, 0.0}, {{-r, 3.0 * r}}},   // -2x = x+y, x <= 0
      {"ray13", {0.0, 0.0}, {{-r, -3.0 * r}}},  // -2x = x-y, x <= 0
      {"ray23", {0.0, 0.0}, {{1.0, 0.0}}},      // y = 0, x >= 0
  });
  return f;
}

/// |x| on R^2 written as max(x, -x); the critical set is the y-axis.
inline std::shared_ptr<PolyhedralFunction> make_absvalley() {
  auto f = std::make_shared<PolyhedralFunction>(
      std::vector<AffinePiece>{{{1.0, 0.0}, 0.0}, {{-1.0, 0.0}, 0.0}});
  f->set_id("absvalley");
  f->declare_strata({{"y-axis", {0.0, 0.0}, {{0.0, 1.0}}}});
  return f;
}

/// 100|y - x^2| + |1 - x|; a sharp curved valley with minimizer (1, 1).
inline std::shared_ptr<CompositeMaxFunction> make_nsbanana() {
  Polynomial valley(2, {{1.0, {0, 1}}, {-1.0, {2, 0}}});
  Polynomial shift(2, {{1.0, {0, 0}}, {-1.0, {1, 0}}});
  auto f = std::make_shared<CompositeMaxFunction>(
      2, std::vector<CompositeTerm>{{100.0, valley, true}, {1.0, shift, true}});
  f->set_id("nsbanana");
  // sup of 100*||(-2x, 1)|| + 1 over the default guard box [-10, 10]^2
  f->declare_lipschitz(100.0 * std::sqrt(401.0) + 1.0, Box::cube(2, -10.0, 10.0));
  f->declare_strata({{"minimizer", {1.0, 1.0}, {}}});
  return f;
}

/// |x| on R as max(x, -x).
inline std::shared_ptr<PolyhedralFunction> make_abs_1d() {
  auto f = std::make_shared<PolyhedralFunction>(
      std::vector<AffinePiece>{{{1.0}, 0.0}, {{-1.0}, 0.0}});
  f->set_id("abs1d");
  f->declare_strata({{"origin", {0.0}, {}}});
  return f;
}

/// ||x||^2.
inline std::shared_ptr<CompositeMaxFunction> make_quadratic_bowl(std::size_t n = 2) {
  std::vector<Monomial> ms;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<int> pw(n, 0);
    pw[k] = 2;
    ms.push_back({1.0, pw});
  }
  auto f = std::make_shared<CompositeMaxFunction>(
      n, std::vector<CompositeTerm>{{1.0, Polynomial(n, ms), false}});
  f->set_id("bowl");
  return f;
}

/// f == 0.
inline std::shared_ptr<CompositeMaxFunction> make_zero_function(std::size_t n = 2) {
  auto f = std::make_shared<CompositeMaxFunction>(n, std::vector<CompositeTerm>{});
  f->set_id("zero");
  f->declare_lipschitz(0.0);
  return f;
}

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"tripod", "absvalley", "nsbanana"};
  return names;
}

inline OraclePtr make_builtin(const std::string& name) {
  if (name == "tripod") return make_tripod();
  if (name == "absvalley") return make_absvalley();
  if (name == "nsbanana") return make_nsbanana();
  throw InputError("unknown built-in function '" + name + "'");
}

}  // namespace subgrad

#endif  // SUBGRAD_FUNCS_HPP
