#pragma once

// Canonical fixtures: the three-lines / hexagon pair of stationary
// 1-varifolds in the disk of radius 2, exact circles and lines, parabolas,
// and slice builders (latitudes, icospheres, perturbed circles) used by
// tests and the fixture CLI.

#include "mmv/varifold.hpp"

#include <map>

namespace mmv {

namespace detail {

// Atoms along the straight segment [a, b] with `subdiv` pieces and
// Gauss-5 nodes per piece; exact tangent direction and weights.
inline void add_segment_atoms(DiscreteVarifold& V, const Vec& a, const Vec& b, int subdiv,
                              double weight_multiplier = 1.0) {
  Vec t = (b - a).normalized();
  double len = (b - a).norm() / subdiv;
  for (int s = 0; s < subdiv; ++s) {
    Vec p0 = a + (double(s) / subdiv) * (b - a);
    Vec p1 = a + (double(s + 1) / subdiv) * (b - a);
    for (auto [node, wq] : gauss01(5)) {
      Atom at;
      at.x = p0 + node * (p1 - p0);
      at.t1 = t;
      at.w = wq * len * weight_multiplier;
      canonicalize(at, 1);
      V.atoms.push_back(at);
    }
  }
}

}  // namespace detail

// Appendix-style fixture: three diameters of the radius-2 disk meeting at
// the origin at 60 degrees.  Mass 12; stationary in the open disk.
// Segments are split at radius 1 so every probe kink sits on a node.
inline DiscreteVarifold three_lines_fixture(int subdiv = 32) {
  DiscreteVarifold V;
  V.dim = 1;
  V.domain = Domain::euclidean(2, 2.0);
  const double s3 = std::sqrt(3.0) / 2.0;
  const Vec dirs[3] = {vec2(1.0, 0.0), vec2(0.5, s3), vec2(-0.5, s3)};
  for (const Vec& u : dirs) {
    detail::add_segment_atoms(V, -2.0 * u, -u, subdiv);
    detail::add_segment_atoms(V, -u, Vec(Vec::Zero()), subdiv);
    detail::add_segment_atoms(V, Vec(Vec::Zero()), u, subdiv);
    detail::add_segment_atoms(V, u, 2.0 * u, subdiv);
  }
  return V;
}

// Companion fixture: same as the three lines outside the unit disk, while
// inside it the regular unit hexagon with vertices on the lines.  Same
// mass (12), stationary, distinct as a varifold.
inline DiscreteVarifold hexagon_fixture(int subdiv = 32) {
  DiscreteVarifold V;
  V.dim = 1;
  V.domain = Domain::euclidean(2, 2.0);
  const double s3 = std::sqrt(3.0) / 2.0;
  const Vec vx[6] = {vec2(1, 0),  vec2(0.5, s3),  vec2(-0.5, s3),
                     vec2(-1, 0), vec2(-0.5, -s3), vec2(0.5, -s3)};
  for (int i = 0; i < 6; ++i) {
    detail::add_segment_atoms(V, vx[i], 2.0 * vx[i], subdiv);       // outer spokes
    detail::add_segment_atoms(V, vx[i], vx[(i + 1) % 6], subdiv);   // hexagon sides
  }
  return V;
}

// Exact-geometry circle varifold: atoms on the circle with true tangents.
inline DiscreteVarifold circle_varifold(const Vec& center, double radius, int n,
                                        Domain domain = Domain::euclidean(2),
                                        double weight_multiplier = 1.0) {
  DiscreteVarifold V;
  V.dim = 1;
  V.domain = std::move(domain);
  double w = 2.0 * kPi * radius / n * weight_multiplier;
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * kPi * (i + 0.5) / n;
    Atom a;
    a.x = center + vec2(radius * std::cos(th), radius * std::sin(th));
    a.t1 = vec2(-std::sin(th), std::cos(th));
    a.w = w;
    canonicalize(a, 1);
    V.atoms.push_back(a);
  }
  return V;
}

inline DiscreteVarifold ellipse_varifold(const Vec& center, double a, double b, int n) {
  DiscreteVarifold V;
  V.dim = 1;
  V.domain = Domain::euclidean(2, std::max(a, b) + center.norm() + 1.0);
  for (int i = 0; i < n; ++i) {
    double t0 = 2.0 * kPi * i / n, t1 = 2.0 * kPi * (i + 1) / n, tm = 0.5 * (t0 + t1);
    Vec p0 = center + vec2(a * std::cos(t0), b * std::sin(t0));
    Vec p1 = center + vec2(a * std::cos(t1), b * std::sin(t1));
    Atom at;
    at.x = center + vec2(a * std::cos(tm), b * std::sin(tm));
    at.t1 = normalized_or_zero(Vec(p1 - p0));
    at.w = (p1 - p0).norm();
    canonicalize(at, 1);
    V.atoms.push_back(at);
  }
  return V;
}

// Straight line of the given multiplicity through `point`, length 2*halflen.
inline DiscreteVarifold line_varifold(const Vec& point, const Vec& direction, double halflen,
                                      int n, double multiplicity = 1.0,
                                      Domain domain = Domain::euclidean(2)) {
  DiscreteVarifold V;
  V.dim = 1;
  V.domain = std::move(domain);
  Vec u = direction.normalized();
  double step = 2.0 * halflen / n;
  for (int i = 0; i < n; ++i) {
    Atom a;
    a.x = point + (-halflen + (i + 0.5) * step) * u;
    a.t1 = u;
    a.w = step * multiplicity;
    canonicalize(a, 1);
    V.atoms.push_back(a);
  }
  return V;
}

// y = 0.5 * curvature * x^2 over [-halfwidth, halfwidth], exact tangents.
inline DiscreteVarifold parabola_varifold(double curvature, double halfwidth, int n) {
  DiscreteVarifold V;
  V.dim = 1;
  V.domain = Domain::euclidean(2, 2.0 * halfwidth + 1.0);
  double step = 2.0 * halfwidth / n;
  for (int i = 0; i < n; ++i) {
    double t = -halfwidth + (i + 0.5) * step;
    Atom a;
    a.x = vec2(t, 0.5 * curvature * t * t);
    a.t1 = vec2(1.0, curvature * t).normalized();
    a.w = step * std::sqrt(1.0 + sq(curvature * t));
    canonicalize(a, 1);
    V.atoms.push_back(a);
  }
  return V;
}

// ---- slice builders ---------------------------------------------------------

// Latitude circle on a round 2-sphere at the given polar angle.
inline Slice latitude_slice(const Manifold& sphere, double polar_angle, int n) {
  double r = sphere.params()[0];
  Slice s;
  s.dim = 1;
  std::vector<int> loop(n);
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * kPi * i / n;
    s.verts.push_back(vec3(r * std::sin(polar_angle) * std::cos(th),
                           r * std::sin(polar_angle) * std::sin(th), r * std::cos(polar_angle)));
    loop[i] = i;
  }
  s.loops.push_back(loop);
  return s;
}

inline Slice great_circle_slice(const Manifold& sphere, int n) {
  return latitude_slice(sphere, 0.5 * kPi, n);
}

// Circle of radius `radius` about `center` in the plane spanned by (u, v).
inline Slice planar_circle_slice(const Vec& center, const Vec& u, const Vec& v, double radius,
                                 int n) {
  Slice s;
  s.dim = 1;
  std::vector<int> loop(n);
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * kPi * i / n;
    s.verts.push_back(center + radius * std::cos(th) * u + radius * std::sin(th) * v);
    loop[i] = i;
  }
  s.loops.push_back(loop);
  return s;
}

// Axis-aligned square loop (for straight-strand diagnostics).
inline Slice square_loop_slice(const Vec& center, double side, int n_per_side) {
  Slice s;
  s.dim = 1;
  double h = side / 2.0;
  Vec corners[4] = {center + vec2(-h, -h), center + vec2(h, -h), center + vec2(h, h),
                    center + vec2(-h, h)};
  std::vector<int> loop;
  for (int e = 0; e < 4; ++e) {
    Vec a = corners[e], b = corners[(e + 1) % 4];
    for (int i = 0; i < n_per_side; ++i) {
      loop.push_back((int)s.verts.size());
      s.verts.push_back(a + (double(i) / n_per_side) * (b - a));
    }
  }
  s.loops.push_back(loop);
  return s;
}

// Latitude circle with a radial wiggle: r(theta) = r0 (1 + amp sin(freq theta)).
inline Slice wiggly_circle_slice(const Manifold& sphere, double polar_angle, int n, double amp,
                                 int freq) {
  Slice s = latitude_slice(sphere, polar_angle, n);
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * kPi * i / n;
    double dphi = amp * std::sin(freq * th);
    double r = sphere.params()[0];
    double phi = polar_angle + dphi;
    s.verts[i] = vec3(r * std::sin(phi) * std::cos(th), r * std::sin(phi) * std::sin(th),
                      r * std::cos(phi));
  }
  return s;
}

// Planar circle with a radial bump supported in an angular window.
inline Slice bumped_circle_slice(const Vec& center, const Vec& u, const Vec& v, double radius,
                                 int n, double bump_amp, double window_center,
                                 double window_halfwidth) {
  Slice s;
  s.dim = 1;
  std::vector<int> loop(n);
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * kPi * i / n;
    double d = th - window_center;
    while (d > kPi) d -= 2.0 * kPi;
    while (d < -kPi) d += 2.0 * kPi;
    double r = radius * (1.0 + bump_amp * bump1(d / window_halfwidth));
    s.verts.push_back(center + r * std::cos(th) * u + r * std::sin(th) * v);
    loop[i] = i;
  }
  s.loops.push_back(loop);
  return s;
}

// Icosphere mesh of radius r; `subdiv` quadruples the face count per level
// (20 * 4^subdiv faces).  The fourth coordinate is set to x4 (level spheres
// of the 3-sphere live in hyperplanes).
inline Slice icosphere_slice(double r, int subdiv, double x4 = 0.0) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec> vs = {vec3(-1, phi, 0), vec3(1, phi, 0),   vec3(-1, -phi, 0),
                         vec3(1, -phi, 0), vec3(0, -1, phi),  vec3(0, 1, phi),
                         vec3(0, -1, -phi), vec3(0, 1, -phi), vec3(phi, 0, -1),
                         vec3(phi, 0, 1),  vec3(-phi, 0, -1), vec3(-phi, 0, 1)};
  std::vector<std::array<int, 3>> fs = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (Vec& v : vs) v.normalize();
  for (int lvl = 0; lvl < subdiv; ++lvl) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec m = (vs[a] + vs[b]).normalized();
      vs.push_back(m);
      int idx = (int)vs.size() - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> nf;
    for (const auto& f : fs) {
      int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      nf.push_back({f[0], ab, ca});
      nf.push_back({f[1], bc, ab});
      nf.push_back({f[2], ca, bc});
      nf.push_back({ab, bc, ca});
    }
    fs = std::move(nf);
  }
  Slice s;
  s.dim = 2;
  for (const Vec& v : vs) {
    Vec p = r * v;
    p[3] = x4;
    s.verts.push_back(p);
  }
  s.tris = fs;
  return s;
}

// Named catalog used by the fixture CLI.
inline DiscreteVarifold fixture_by_name(const std::string& name) {
  if (name == "appendixC-lines") return three_lines_fixture();
  if (name == "appendixC-hexagon") return hexagon_fixture();
  if (name == "unit-circle") return circle_varifold(Vec::Zero(), 1.0, 512);
  if (name == "doubled-line")
    return line_varifold(Vec::Zero(), vec2(1, 0), 2.0, 512, 2.0, Domain::euclidean(2, 2.0));
  throw DomainError("unknown fixture: " + name);
}

}  // namespace mmv
