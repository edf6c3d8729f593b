#ifndef SUBGRAD_LINALG_HPP
#define SUBGRAD_LINALG_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace subgrad {

using Vector = std::vector<double>;
using ConstView = std::span<const double>;

/// Raised when a caller violates an operation's preconditions.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an oracle or a recursion produces a non-finite number.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double dot(ConstView a, ConstView b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm(ConstView a) { return std::sqrt(dot(a, a)); }

inline double distance(ConstView a, ConstView b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

inline Vector operator-(ConstView a, ConstView b) {
  Vector out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
  return out;
}

inline Vector operator+(ConstView a, ConstView b) {
  Vector out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] + b[k];
  return out;
}

inline Vector scaled(ConstView a, double s) {
  Vector out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = s * a[k];
  return out;
}

inline bool all_finite(ConstView a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

inline void require_dimension(ConstView x, std::size_t n, const char* what) {
  if (x.size() != n)
    throw InputError(std::string(what) + ": expected dimension " + std::to_string(n) +
                     ", got " + std::to_string(x.size()));
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      carry_ += (sum_ - t) + v;
    else
      carry_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Componentwise compensated accumulator for vector sums.
class CompensatedVectorSum {
 public:
  explicit CompensatedVectorSum(std::size_t n = 0) : parts_(n) {}
  void add_scaled(ConstView v, double s) {
    for (std::size_t k = 0; k < parts_.size(); ++k) parts_[k].add(s * v[k]);
  }
  Vector value() const {
    Vector out(parts_.size());
    for (std::size_t k = 0; k < parts_.size(); ++k) out[k] = parts_[k].value();
    return out;
  }
  std::size_t size() const { return parts_.size(); }

 private:
  std::vector<CompensatedSum> parts_;
};

/// Axis-aligned box [lo, hi] in R^n.
struct Box {
  Vector lo;
  Vector hi;

  static Box cube(std::size_t n, double lo, double hi) {
    return Box{Vector(n, lo), Vector(n, hi)};
  }

  std::size_t dimension() const { return lo.size(); }

  bool contains(ConstView x) const {
    for (std::size_t k = 0; k < lo.size(); ++k)
      if (!(x[k] >= lo[k] && x[k] <= hi[k])) return false;
    return true;
  }

  void validate() const {
    if (lo.empty() || lo.size() != hi.size()) throw InputError("box: lo/hi dimension mismatch");
    for (std::size_t k = 0; k < lo.size(); ++k)
      if (!(lo[k] < hi[k])) throw InputError("box: lo must be strictly below hi");
  }

  friend bool operator==(const Box&, const Box&) = default;
};

}  // namespace subgrad

#endif  // SUBGRAD_LINALG_HPP
