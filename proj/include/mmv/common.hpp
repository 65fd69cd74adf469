#pragma once

// Shared small types and numeric helpers used across the library.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmv {

// Points, tangent vectors and directions live in the ambient Euclidean
// space of the embedded manifold (R^3 or R^4).  Three-dimensional
// embeddings keep the fourth component at exactly zero.
using Vec = Eigen::Vector4d;
using Mat = Eigen::Matrix4d;

using Rng = std::mt19937_64;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

inline Vec vec3(double x, double y, double z) { return Vec(x, y, z, 0.0); }
inline Vec vec2(double x, double y) { return Vec(x, y, 0.0, 0.0); }

// Errors follow the spec'd failure classes: bad inputs are domain errors,
// out-of-range parameters are range errors, algorithmic failures carry a
// dedicated type so callers can react (shrink a step, refine a grid, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct RangeError : std::range_error {
  using std::range_error::range_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double sq(double x) { return x * x; }

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

// Quintic smoothstep: C^2 ramp with vanishing first and second derivative
// at both ends.  Used for all bump profiles (exact support control).
inline double smoothstep5(double u) {
  u = clamp01(u);
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

inline double smoothstep5_deriv(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

// C^2 bump on [-1, 1], equal to 1 at 0 and 0 outside the open interval.
inline double bump1(double s) {
  double a = std::abs(s);
  if (a >= 1.0) return 0.0;
  return 1.0 - smoothstep5(a);
}

inline double bump1_deriv(double s) {
  double a = std::abs(s);
  if (a >= 1.0) return 0.0;
  double d = -smoothstep5_deriv(a);
  return s < 0.0 ? -d : d;
}

// Normalizes v; returns zero vector when |v| is below eps.
inline Vec normalized_or_zero(const Vec& v, double eps = 1e-300) {
  double n = v.norm();
  return n > eps ? Vec(v / n) : Vec(Vec::Zero());
}

// Canonical representative of an unoriented direction: flips the sign so
// the first component with magnitude above tol is positive.
inline Vec canonical_direction(Vec d, double tol = 1e-12) {
  for (int i = 0; i < 4; ++i) {
    if (std::abs(d[i]) > tol) {
      if (d[i] < 0.0) d = -d;
      break;
    }
  }
  return d;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec gaussian_vec(Rng& rng, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v = Vec::Zero();
  for (int i = 0; i < dim; ++i) v[i] = g(rng);
  return v;
}

}  // namespace mmv
