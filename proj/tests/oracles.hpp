#pragma once

// Independent oracles used to freeze expected values: a self-contained
// fixed-step geodesic integrator, Simpson ellipse circumference, and
// finite-difference measure derivatives computed directly on mapped
// slices (no shared code with the library paths they check).

#include "mmv/common.hpp"
#include "mmv/slice.hpp"

namespace oracles {

using mmv::Vec;

// Plain fixed-step RK4 on the implicit-surface geodesic equation
// x'' = lambda grad F for the ellipsoid sum x_i^2/a_i^2 = 1; no adaptive
// stepping and no reprojection, so the code path is independent of the
// library integrator.
inline Vec ellipsoid_exp_rk4(double a, double b, double c, Vec x, Vec v, int nsteps = 20000) {
  auto accel = [&](const Vec& p, const Vec& w) -> Vec {
    Vec g = mmv::vec3(p[0] / (a * a), p[1] / (b * b), p[2] / (c * c));
    double whw = w[0] * w[0] / (a * a) + w[1] * w[1] / (b * b) + w[2] * w[2] / (c * c);
    return (-whw / g.squaredNorm()) * g;
  };
  double len = v.norm();
  if (len == 0.0) return x;
  Vec w = v;  // integrate in time 1 with speed |v|
  double h = 1.0 / nsteps;
  for (int i = 0; i < nsteps; ++i) {
    Vec k1x = w, k1v = accel(x, w);
    Vec k2x = w + 0.5 * h * k1v, k2v = accel(x + 0.5 * h * k1x, k2x);
    Vec k3x = w + 0.5 * h * k2v, k3v = accel(x + 0.5 * h * k2x, k3x);
    Vec k4x = w + h * k3v, k4v = accel(x + h * k3x, k4x);
    x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    w += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  return x;
}

// Circumference of the ellipse with semi-axes (a, b) by composite Simpson
// on the arclength integrand (analytic, so the error is ~machine at this
// resolution).
inline double ellipse_circumference(double a, double b, int n = 1 << 16) {
  auto f = [&](double t) {
    return std::sqrt(a * a * std::sin(t) * std::sin(t) + b * b * std::cos(t) * std::cos(t));
  };
  double h = 2.0 * mmv::kPi / n;
  double s = f(0.0) + f(2.0 * mmv::kPi);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// d/dt measure(slice moved by t * chi) at t = 0, by central differences on
// the mapped vertex sets; uses nothing but measure().
template <typename Field>
double fd_measure_derivative(const mmv::Slice& s, Field&& chi, double h = 1e-4) {
  auto moved = [&](double t) {
    mmv::Slice m = s;
    for (std::size_t i = 0; i < m.verts.size(); ++i) m.verts[i] = s.verts[i] + t * chi(s.verts[i]);
    return mmv::measure(m);
  };
  return (moved(h) - moved(-h)) / (2.0 * h);
}

// Exact mass of the hexagon fixture inside the ball of radius rho (arc
// geometry of the unit hexagon plus six unit spokes).
inline double hexagon_mass_in_ball(double rho) {
  double inr = std::sqrt(3.0) / 2.0;
  double hex = 0.0;
  if (rho >= 1.0)
    hex = 6.0;
  else if (rho > inr)
    hex = 12.0 * std::sqrt(rho * rho - 3.0 / 4.0);
  double spokes = rho <= 1.0 ? 0.0 : 6.0 * (std::min(rho, 2.0) - 1.0);
  return hex + spokes;
}

}  // namespace oracles
