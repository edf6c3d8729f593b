#ifndef SUBGRAD_HULL_HPP
#define SUBGRAD_HULL_HPP

// Finite descriptions of Clarke subdifferentials and the minimum-norm
// point of a convex hull of finitely many vectors.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "subgrad/linalg.hpp"

namespace subgrad {

enum class SubdiffKind { singleton, vertex_hull };

/// conv(vertices). For a singleton there is exactly one vertex.
struct SubdiffDescription {
  SubdiffKind kind = SubdiffKind::singleton;
  std::vector<Vector> vertices;

  static SubdiffDescription single(Vector v) {
    return SubdiffDescription{SubdiffKind::singleton, {std::move(v)}};
  }
  static SubdiffDescription hull(std::vector<Vector> vs) {
    const auto kind = vs.size() == 1 ? SubdiffKind::singleton : SubdiffKind::vertex_hull;
    return SubdiffDescription{kind, std::move(vs)};
  }

  std::size_t dimension() const { return vertices.empty() ? 0 : vertices.front().size(); }

  void validate() const {
    if (vertices.empty()) throw InputError("subdifferential description has no vertices");
    const std::size_t n = vertices.front().size();
    for (const auto& v : vertices) {
      if (v.size() != n) throw InputError("subdifferential vertices differ in dimension");
      if (!all_finite(v)) throw InputError("subdifferential vertex is not finite");
    }
  }
};

struct HullPoint {
  Vector point;
  Vector weights;  // barycentric weights over the input vertices
};

namespace detail {

inline HullPoint segment_min_norm(ConstView a, ConstView b, std::size_t ia, std::size_t ib,
                                  std::size_t k) {
  const Vector e = b - a;
  const double ee = dot(e, e);
  double t = 0.0;
  if (ee > 0.0) t = std::clamp(-dot(a, e) / ee, 0.0, 1.0);
  HullPoint out{Vector(a.size()), Vector(k, 0.0)};
  for (std::size_t c = 0; c < a.size(); ++c) out.point[c] = a[c] + t * e[c];
  out.weights[ia] += 1.0 - t;
  out.weights[ib] += t;
  return out;
}

inline HullPoint triangle_min_norm(const std::vector<Vector>& v, std::size_t i0, std::size_t i1,
                                   std::size_t i2) {
  const std::size_t k = v.size();
  const Vector& p = v[i0];
  const Vector e1 = v[i1] - p;
  const Vector e2 = v[i2] - p;
  const double a11 = dot(e1, e1), a12 = dot(e1, e2), a22 = dot(e2, e2);
  const double r1 = -dot(p, e1), r2 = -dot(p, e2);
  const double det = a11 * a22 - a12 * a12;
  const double scale = a11 * a22;
  if (det > 1e-14 * scale && scale > 0.0) {
    const double s = (r1 * a22 - r2 * a12) / det;
    const double t = (a11 * r2 - a12 * r1) / det;
    if (s >= 0.0 && t >= 0.0 && s + t <= 1.0) {
      HullPoint out{Vector(p.size()), Vector(k, 0.0)};
      for (std::size_t c = 0; c < p.size(); ++c) out.point[c] = p[c] + s * e1[c] + t * e2[c];
      out.weights[i0] = 1.0 - s - t;
      out.weights[i1] += s;
      out.weights[i2] += t;
      return out;
    }
  }
  HullPoint best = segment_min_norm(v[i0], v[i1], i0, i1, k);
  for (auto cand : {segment_min_norm(v[i1], v[i2], i1, i2, k),
                    segment_min_norm(v[i0], v[i2], i0, i2, k)}) {
    if (norm(cand.point) < norm(best.point)) best = std::move(cand);
  }
  return best;
}

// Min-norm point of the affine hull of v[idx]: solves the bordered Gram
// system [G 1; 1^T 0] [a; mu] = [0; 1]. Returns false if it is singular.
inline bool affine_min_norm(const std::vector<Vector>& v, const std::vector<std::size_t>& idx,
                            Vector& alpha) {
  const std::size_t m = idx.size();
  std::vector<Vector> a(m + 1, Vector(m + 2, 0.0));
  double scale = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) a[r][c] = dot(v[idx[r]], v[idx[c]]);
    scale = std::max(scale, a[r][r]);
    a[r][m] = 1.0;
    a[m][r] = 1.0;
  }
  a[m][m + 1] = 1.0;
  for (std::size_t c = 0; c <= m; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r <= m; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) <= 1e-14 * std::max(scale, 1.0)) return false;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r <= m; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k <= m + 1; ++k) a[r][k] -= f * a[c][k];
    }
  }
  alpha.assign(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) alpha[r] = a[r][m + 1] / a[r][r];
  return true;
}

// Wolfe's active-set method for the min-norm point of a polytope.
inline HullPoint wolfe_min_norm(const std::vector<Vector>& v) {
  const std::size_t k = v.size();
  const std::size_t n = v.front().size();
  double big = 0.0;
  std::size_t start = 0;
  for (std::size_t j = 0; j < k; ++j) {
    big = std::max(big, dot(v[j], v[j]));
    if (dot(v[j], v[j]) < dot(v[start], v[start])) start = j;
  }
  std::vector<std::size_t> s{start};
  Vector lambda{1.0};
  auto point_of = [&](const Vector& w) {
    Vector x(n, 0.0);
    for (std::size_t r = 0; r < s.size(); ++r)
      for (std::size_t c = 0; c < n; ++c) x[c] += w[r] * v[s[r]][c];
    return x;
  };
  Vector x = v[start];
  const double tol = 1e-13 * std::max(big, 1e-300);
  for (std::size_t major = 0; major < 50 * k + 50; ++major) {
    std::size_t j = 0;
    for (std::size_t q = 1; q < k; ++q)
      if (dot(x, v[q]) < dot(x, v[j])) j = q;
    if (dot(x, x) - dot(x, v[j]) <= tol) break;
    if (std::find(s.begin(), s.end(), j) != s.end()) break;
    s.push_back(j);
    lambda.push_back(0.0);
    for (std::size_t minor = 0; minor <= k; ++minor) {
      Vector alpha;
      if (!affine_min_norm(v, s, alpha)) {
        // Affinely dependent support: drop the newest vertex and stop.
        s.pop_back();
        lambda.pop_back();
        major = 50 * k + 50;
        break;
      }
      if (*std::min_element(alpha.begin(), alpha.end()) > 0.0) {
        lambda = alpha;
        break;
      }
      double theta = 1.0;
      for (std::size_t r = 0; r < s.size(); ++r)
        if (alpha[r] <= 0.0 && lambda[r] - alpha[r] > 0.0)
          theta = std::min(theta, lambda[r] / (lambda[r] - alpha[r]));
      std::vector<std::size_t> keep_s;
      Vector keep_l;
      for (std::size_t r = 0; r < s.size(); ++r) {
        const double w = (1.0 - theta) * lambda[r] + theta * alpha[r];
        if (w > 1e-15) {
          keep_s.push_back(s[r]);
          keep_l.push_back(w);
        }
      }
      s = std::move(keep_s);
      lambda = std::move(keep_l);
      double total = 0.0;
      for (double w : lambda) total += w;
      for (double& w : lambda) w /= total;
    }
    x = point_of(lambda);
  }
  HullPoint out{point_of(lambda), Vector(k, 0.0)};
  for (std::size_t r = 0; r < s.size(); ++r) out.weights[s[r]] = lambda[r];
  return out;
}

}  // namespace detail

/// Minimum-norm point of conv(vertices).
///
/// Exact for up to three vertices in any dimension and for any vertex count
/// in the plane (every planar hull point lies in a vertex triangle). Larger
/// problems use Wolfe's active-set method.
inline HullPoint min_norm_point(const std::vector<Vector>& vertices) {
  if (vertices.empty()) throw InputError("min_norm_point: empty vertex list");
  const std::size_t k = vertices.size();
  const std::size_t n = vertices.front().size();
  if (k == 1) return HullPoint{vertices.front(), Vector{1.0}};
  if (k == 2) return detail::segment_min_norm(vertices[0], vertices[1], 0, 1, 2);
  if (k == 3) return detail::triangle_min_norm(vertices, 0, 1, 2);
  if (n <= 2 && k <= 16) {
    HullPoint best = detail::segment_min_norm(vertices[0], vertices[1], 0, 1, k);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b)
        for (std::size_t c = b + 1; c < k; ++c) {
          HullPoint cand = detail::triangle_min_norm(vertices, a, b, c);
          if (norm(cand.point) < norm(best.point)) best = std::move(cand);
        }
    return best;
  }
  return detail::wolfe_min_norm(vertices);
}

/// dist(0, conv(sd.vertices)); zero exactly at Clarke-critical points.
inline double dist_to_critical(const SubdiffDescription& sd) {
  sd.validate();
  return norm(min_norm_point(sd.vertices).point);
}

/// dist(v, conv(vertices)).
inline double distance_to_hull(const std::vector<Vector>& vertices, ConstView v) {
  std::vector<Vector> shifted;
  shifted.reserve(vertices.size());
  for (const auto& w : vertices) shifted.push_back(w - v);
  return norm(min_norm_point(shifted).point);
}

}  // namespace subgrad

#endif  // SUBGRAD_HULL_HPP
