#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fedres/errors.hpp"

namespace fedres {

using Vector = std::vector<double>;

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvariantError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

inline Vector scaled(std::span<const double> v, double c) {
  Vector out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = c * v[k];
  return out;
}

/// v - c * g
inline Vector step(std::span<const double> v, double c, std::span<const double> g) {
  require_same_dim(v.size(), g.size(), "step");
  Vector out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] - c * g[k];
  return out;
}

inline void add_to(Vector& acc, std::span<const double> g) {
  require_same_dim(acc.size(), g.size(), "add_to");
  for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "distance");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

/// Euclidean projection onto {u : |u| <= radius}.
///
/// Idempotent bit-for-bit: when rounding leaves the rescaled vector a hair
/// outside the ball, the scale is nudged down until the result is inside, so a
/// second call sees an in-ball vector and returns it untouched.
inline Vector project_ball(Vector v, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw ConfigError("project_ball: radius must be positive and finite");
  }
  const double n = norm(v);
  if (n <= radius) return v;
  double scale = radius / n;
  Vector out = scaled(v, scale);
  while (norm(out) > radius) {
    scale = std::nextafter(scale, 0.0);
    out = scaled(v, scale);
  }
  return out;
}

inline Vector concat(std::span<const double> a, std::span<const double> b) {
  Vector out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace fedres
