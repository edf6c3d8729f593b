#ifndef SUBGRAD_SELECTION_HPP
#define SUBGRAD_SELECTION_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "subgrad/hull.hpp"

namespace subgrad {

enum class SelectionKind { first_active, min_norm, random_vertex, random_hull };

inline std::string to_string(SelectionKind k) {
  switch (k) {
    case SelectionKind::first_active: return "first-active";
    case SelectionKind::min_norm: return "min-norm";
    case SelectionKind::random_vertex: return "random-vertex";
    case SelectionKind::random_hull: return "random-hull";
  }
  return "?";
}

inline SelectionKind parse_selection_kind(const std::string& s) {
  if (s == "first-active") return SelectionKind::first_active;
  if (s == "min-norm") return SelectionKind::min_norm;
  if (s == "random-vertex") return SelectionKind::random_vertex;
  if (s == "random-hull") return SelectionKind::random_hull;
  throw InputError("unknown selection policy '" + s + "'");
}

struct SelectionPolicy {
  SelectionKind kind = SelectionKind::first_active;
  std::uint64_t seed = 0;

  friend bool operator==(const SelectionPolicy&, const SelectionPolicy&) = default;
};

/// Stateful chooser of one element of conv(vertices).
///
/// Random kinds draw from a seeded mt19937_64 through hand-rolled uniform
/// and exponential transforms so the stream is identical on every standard
/// library. Not safe to share between concurrent runs.
class Selector {
 public:
  explicit Selector(SelectionPolicy policy) : policy_(policy), rng_(policy.seed) {}

  const SelectionPolicy& policy() const { return policy_; }

  Vector select(const SubdiffDescription& sd) {
    const auto& vs = sd.vertices;
    if (vs.size() == 1) return vs.front();
    switch (policy_.kind) {
      case SelectionKind::first_active:
        return vs.front();
      case SelectionKind::min_norm:
        return min_norm_point(vs).point;
      case SelectionKind::random_vertex:
        return vs[rng_() % vs.size()];
      case SelectionKind::random_hull: {
        // Dirichlet(1, ..., 1) by normalized unit exponentials.
        Vector w(vs.size());
        double total = 0.0;
        for (double& x : w) {
          x = -std::log1p(-uniform());
          total += x;
        }
        Vector out(vs.front().size(), 0.0);
        for (std::size_t j = 0; j < vs.size(); ++j)
          for (std::size_t c = 0; c < out.size(); ++c) out[c] += (w[j] / total) * vs[j][c];
        return out;
      }
    }
    return vs.front();
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  SelectionPolicy policy_;
  std::mt19937_64 rng_;
};

inline Vector select(SelectionPolicy policy, const SubdiffDescription& sd) {
  Selector s(policy);
  return s.select(sd);
}

}  // namespace subgrad

#endif  // SUBGRAD_SELECTION_HPP
