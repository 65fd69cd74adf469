#pragma once

// Discretized family members: closed polylines on surfaces (1-d) and
// triangle meshes in 3-manifolds (2-d), with optional singular-point
// marks for degenerate slices.

#include "mmv/manifold.hpp"

#include <array>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mmv {

struct Slice {
  int dim = 1;  // 1 = polyline cycles, 2 = triangle mesh
  std::vector<Vec> verts;
  std::vector<std::vector<int>> loops;   // closed cycles of vertex indices (dim 1)
  std::vector<std::array<int, 3>> tris;  // triangle list (dim 2)
  std::vector<int> singular_marks;       // vertex indices flagged as degenerate points

  bool is_point_slice() const { return loops.empty() && tris.empty(); }

  std::size_t element_count() const {
    if (dim == 2) return tris.size();
    std::size_t n = 0;
    for (const auto& l : loops) n += l.size();
    return n;
  }
};

inline double segment_length(const Vec& a, const Vec& b) { return (b - a).norm(); }

inline double triangle_area(const Vec& a, const Vec& b, const Vec& c) {
  Vec e1 = b - a, e2 = c - a;
  double g = e1.squaredNorm() * e2.squaredNorm() - sq(e1.dot(e2));
  return 0.5 * std::sqrt(std::max(0.0, g));
}

// Total length (dim 1) or area (dim 2); point slices measure zero.
inline double measure(const Slice& s) {
  double m = 0.0;
  if (s.dim == 1) {
    for (const auto& loop : s.loops) {
      std::size_t n = loop.size();
      for (std::size_t i = 0; i < n; ++i)
        m += segment_length(s.verts[loop[i]], s.verts[loop[(i + 1) % n]]);
    }
  } else {
    for (const auto& t : s.tris) m += triangle_area(s.verts[t[0]], s.verts[t[1]], s.verts[t[2]]);
  }
  return m;
}

// Gradient of the measure with respect to every vertex position.
inline std::vector<Vec> measure_gradient(const Slice& s) {
  std::vector<Vec> g(s.verts.size(), Vec::Zero());
  if (s.dim == 1) {
    for (const auto& loop : s.loops) {
      std::size_t n = loop.size();
      for (std::size_t i = 0; i < n; ++i) {
        int a = loop[i], b = loop[(i + 1) % n];
        Vec e = s.verts[b] - s.verts[a];
        double len = e.norm();
        if (len < 1e-300) continue;
        g[a] -= e / len;
        g[b] += e / len;
      }
    }
  } else {
    for (const auto& t : s.tris) {
      const Vec &a = s.verts[t[0]], &b = s.verts[t[1]], &c = s.verts[t[2]];
      double area = triangle_area(a, b, c);
      if (area < 1e-300) continue;
      Vec e1 = b - a, e2 = c - a;
      double q11 = e1.squaredNorm(), q22 = e2.squaredNorm(), q12 = e1.dot(e2);
      // d(area)/d(e1) = (q22 e1 - q12 e2)/(4 area), symmetric in e2.
      Vec d1 = (q22 * e1 - q12 * e2) / (4.0 * area);
      Vec d2 = (q11 * e2 - q12 * e1) / (4.0 * area);
      g[t[1]] += d1;
      g[t[2]] += d2;
      g[t[0]] -= d1 + d2;
    }
  }
  return g;
}

// Hausdorff distance between vertex samples, evaluated both ways.
inline double hausdorff_distance(const Slice& a, const Slice& b) {
  if (a.verts.empty() || b.verts.empty()) return a.verts.empty() && b.verts.empty() ? 0.0 : 1e300;
  auto one_way = [](const Slice& p, const Slice& q) {
    double worst = 0.0;
    for (const Vec& x : p.verts) {
      double best = 1e300;
      for (const Vec& y : q.verts) best = std::min(best, (x - y).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_way(a, b), one_way(b, a));
}

// Smallest incident edge length per vertex; the flow step scale.
inline std::vector<double> local_feature_size(const Slice& s) {
  std::vector<double> f(s.verts.size(), 1e300);
  auto upd = [&](int i, int j) {
    double d = (s.verts[i] - s.verts[j]).norm();
    f[i] = std::min(f[i], d);
    f[j] = std::min(f[j], d);
  };
  if (s.dim == 1) {
    for (const auto& loop : s.loops) {
      std::size_t n = loop.size();
      for (std::size_t i = 0; i < n; ++i) upd(loop[i], loop[(i + 1) % n]);
    }
  } else {
    for (const auto& t : s.tris) {
      upd(t[0], t[1]);
      upd(t[1], t[2]);
      upd(t[2], t[0]);
    }
  }
  return f;
}

struct SliceValidity {
  bool ok = true;
  std::string message;
};

// Structural checks: vertices on the manifold, cycles of length >= 3,
// triangle meshes edge-manifold (every edge in at most two triangles).
inline SliceValidity validate_slice(const Slice& s, const Manifold& m,
                                    double proj_tol = 1e-6) {
  for (const Vec& v : s.verts)
    if (!m.on_manifold(v, proj_tol)) return {false, "vertex off manifold"};
  if (s.dim == 1) {
    for (const auto& loop : s.loops)
      if (loop.size() < 3) return {false, "polyline cycle with fewer than 3 vertices"};
  } else {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : s.tris) {
      for (int k = 0; k < 3; ++k) {
        int i = t[k], j = t[(k + 1) % 3];
        edge_count[{std::min(i, j), std::max(i, j)}]++;
      }
    }
    for (const auto& [e, c] : edge_count)
      if (c > 2) return {false, "non-manifold edge (shared by more than two triangles)"};
  }
  return {};
}

// Pointwise map applied to every vertex; connectivity is preserved.
template <typename F>
Slice map_slice(const Slice& s, F&& f) {
  Slice out = s;
  for (std::size_t i = 0; i < out.verts.size(); ++i) out.verts[i] = f(s.verts[i]);
  return out;
}

// ---- discrete curvature --------------------------------------------------

// Curvature vector at a polyline vertex: change of unit edge direction per
// mean adjacent length.  |.| equals 1/r exactly on a regular n-gon of a
// circle of radius r.
inline Vec polyline_curvature_vector(const Vec& prev, const Vec& at, const Vec& next) {
  Vec e0 = at - prev, e1 = next - at;
  double l0 = e0.norm(), l1 = e1.norm();
  if (l0 < 1e-300 || l1 < 1e-300) return Vec::Zero();
  return (e1 / l1 - e0 / l0) / (0.5 * (l0 + l1));
}

// Cotangent-weight mean-curvature normal at mesh vertices (works in any
// ambient dimension); entry i is H_i = (1/2A_i) sum (cot a + cot b)(x_i - x_j).
inline std::vector<Vec> mesh_mean_curvature(const Slice& s) {
  std::vector<Vec> H(s.verts.size(), Vec::Zero());
  std::vector<double> area(s.verts.size(), 0.0);
  auto cot = [](const Vec& u, const Vec& v) {
    double c = u.dot(v);
    double g = u.squaredNorm() * v.squaredNorm() - c * c;
    return c / std::sqrt(std::max(g, 1e-300));
  };
  for (const auto& t : s.tris) {
    const Vec &a = s.verts[t[0]], &b = s.verts[t[1]], &c = s.verts[t[2]];
    double A = triangle_area(a, b, c);
    for (int k = 0; k < 3; ++k) area[t[k]] += A / 3.0;
    double ca = cot(b - a, c - a);  // angle at a, opposite edge bc
    double cb = cot(a - b, c - b);
    double cc = cot(a - c, b - c);
    H[t[1]] += 0.5 * ca * (b - c);
    H[t[2]] += 0.5 * ca * (c - b);
    H[t[0]] += 0.5 * cb * (a - c);
    H[t[2]] += 0.5 * cb * (c - a);
    H[t[0]] += 0.5 * cc * (a - b);
    H[t[1]] += 0.5 * cc * (b - a);
  }
  for (std::size_t i = 0; i < H.size(); ++i)
    H[i] = area[i] > 1e-300 ? Vec(H[i] / (2.0 * area[i])) : Vec(Vec::Zero());
  return H;
}

// ---- OBJ-style export ------------------------------------------------------

inline void write_obj(std::ostream& os, const Slice& s) {
  os << "# dim " << s.dim << "\n";
  for (const Vec& v : s.verts) {
    os << "v " << v[0] << " " << v[1] << " " << v[2];
    if (v[3] != 0.0) os << " " << v[3];
    os << "\n";
  }
  for (const auto& loop : s.loops) {
    os << "l";
    for (int i : loop) os << " " << (i + 1);
    if (!loop.empty()) os << " " << (loop[0] + 1);
    os << "\n";
  }
  for (const auto& t : s.tris) os << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  if (!s.singular_marks.empty()) {
    os << "# singular";
    for (int i : s.singular_marks) os << " " << i;
    os << "\n";
  }
}

inline void write_obj_file(const std::string& path, const Slice& s) {
  std::ofstream f(path);
  if (!f) throw NumericError("cannot open " + path);
  write_obj(f, s);
}

}  // namespace mmv
