#pragma once

// One-parameter families of slices: construction from Morse levels
// (analytic level sets on spheres/ellipsoids, marching squares /
// tetrahedra on flat tori), the width functional, saturation moves, and
// the isoperimetric lower bound with its bisection certificate.

#include "mmv/fixtures.hpp"
#include "mmv/slice.hpp"

#include <nlohmann/json.hpp>

namespace mmv {

struct SweepOut {
  Manifold manifold = Manifold::round_sphere2();
  std::vector<double> times;        // t_0 = 0 < ... < t_K = 1
  std::vector<Slice> slices;        // one per grid time
  std::vector<int> singular_times;  // indices into `times` (the set T)
  int singular_budget = 16;         // N: total singular-point allowance
  std::string provenance = "morse-levels";  // or "deformed"
  double delta_cont = 0.0;          // (c1) measure-continuity tolerance
  double h_cont = 0.0;              // (c2) Hausdorff-continuity tolerance
  std::string morse_name;           // set for morse-levels provenance
  std::vector<double> levels;       // Morse level per grid time (morse provenance)

  int grid_size() const { return (int)times.size() - 1; }
  bool time_is_singular(int i) const {
    return std::find(singular_times.begin(), singular_times.end(), i) != singular_times.end();
  }
};

struct SweepOutValidity {
  bool ok = true;
  std::string message;
  double worst_measure_jump = 0.0;
  double worst_hausdorff_jump = 0.0;
};

inline SweepOutValidity validate_sweepout(const SweepOut& f) {
  SweepOutValidity v;
  if (f.times.size() != f.slices.size() || f.times.size() < 2)
    return {false, "grid/slice size mismatch", 0, 0};
  int marks = 0;
  for (std::size_t i = 0; i < f.slices.size(); ++i) {
    marks += (int)f.slices[i].singular_marks.size();
    if (!f.time_is_singular((int)i) && !f.slices[i].singular_marks.empty())
      return {false, "singular mark at a regular time", 0, 0};
  }
  if (marks > f.singular_budget) return {false, "singular-point budget exceeded", 0, 0};
  for (std::size_t i = 0; i + 1 < f.slices.size(); ++i) {
    double dm = std::abs(measure(f.slices[i + 1]) - measure(f.slices[i]));
    double dh = hausdorff_distance(f.slices[i], f.slices[i + 1]);
    v.worst_measure_jump = std::max(v.worst_measure_jump, dm);
    v.worst_hausdorff_jump = std::max(v.worst_hausdorff_jump, dh);
  }
  if (f.delta_cont > 0.0 && v.worst_measure_jump > f.delta_cont)
    return {false, "measure continuity (c1) violated", v.worst_measure_jump,
            v.worst_hausdorff_jump};
  if (f.h_cont > 0.0 && v.worst_hausdorff_jump > f.h_cont)
    return {false, "Hausdorff continuity (c2) violated", v.worst_measure_jump,
            v.worst_hausdorff_jump};
  return v;
}

// F(f): the measure of the maximal slice over the grid.
inline std::pair<int, double> max_slice(const SweepOut& f) {
  int arg = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < f.slices.size(); ++i) {
    double m = measure(f.slices[i]);
    if (m > best) {
      best = m;
      arg = (int)i;
    }
  }
  return {arg, best};
}

// ---- Morse level-set extraction -------------------------------------------------

namespace detail {

inline Slice point_slice(const Vec& p) {
  Slice s;
  s.dim = 1;
  s.verts.push_back(p);
  s.singular_marks.push_back(0);
  return s;
}

// Analytic level circle of the height function on a sphere/ellipsoid.
inline Slice level_circle(const Manifold& m, double c, int n) {
  Slice s;
  s.dim = 1;
  double a, b;
  if (m.kind() == ManifoldKind::RoundSphere2) {
    double r = m.params()[0];
    a = b = std::sqrt(std::max(0.0, sq(r) - sq(c)));
  } else {
    double q = std::sqrt(std::max(0.0, 1.0 - sq(c / m.params()[2])));
    a = m.params()[0] * q;
    b = m.params()[1] * q;
  }
  std::vector<int> loop(n);
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * kPi * i / n;
    s.verts.push_back(vec3(a * std::cos(th), b * std::sin(th), c));
    loop[i] = i;
  }
  s.loops.push_back(loop);
  return s;
}

// Marching squares for { f = level } on the periodic chart of a flat
// 2-torus; crossings chained into closed loops.
inline Slice torus2_level_set(const Manifold& m, double level, int grid) {
  double L = m.params()[0], h = L / grid;
  auto fval = [&](int i, int j) {
    return m.morse_value("height", m.torus2_embed(((i % grid) + grid) % grid * h,
                                                  ((j % grid) + grid) % grid * h));
  };
  struct EdgeKey {
    int i, j, axis;
    bool operator<(const EdgeKey& o) const {
      return std::tie(i, j, axis) < std::tie(o.i, o.j, o.axis);
    }
  };
  std::map<EdgeKey, int> edge_vertex;
  Slice s;
  s.dim = 1;
  auto crossing = [&](int i, int j, int axis) -> int {
    EdgeKey k{(i % grid + grid) % grid, (j % grid + grid) % grid, axis};
    auto it = edge_vertex.find(k);
    if (it != edge_vertex.end()) return it->second;
    double f0 = fval(k.i, k.j);
    double f1 = axis == 0 ? fval(k.i + 1, k.j) : fval(k.i, k.j + 1);
    double t = (level - f0) / (f1 - f0);
    double u = k.i * h + (axis == 0 ? t * h : 0.0);
    double v = k.j * h + (axis == 1 ? t * h : 0.0);
    s.verts.push_back(m.torus2_embed(u, v));
    int idx = (int)s.verts.size() - 1;
    edge_vertex[k] = idx;
    return idx;
  };
  std::map<int, std::vector<int>> adj;
  auto link = [&](int a, int b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      double v00 = fval(i, j), v10 = fval(i + 1, j), v11 = fval(i + 1, j + 1),
             v01 = fval(i, j + 1);
      std::vector<int> cross;
      auto differ = [&](double a, double b) { return (a > level) != (b > level); };
      int e_bottom = -1, e_right = -1, e_top = -1, e_left = -1;
      if (differ(v00, v10)) cross.push_back(e_bottom = crossing(i, j, 0));
      if (differ(v10, v11)) cross.push_back(e_right = crossing(i + 1, j, 1));
      if (differ(v01, v11)) cross.push_back(e_top = crossing(i, j + 1, 0));
      if (differ(v00, v01)) cross.push_back(e_left = crossing(i, j, 1));
      if (cross.empty()) continue;
      if (cross.size() == 2) {
        link(cross[0], cross[1]);
      } else if (cross.size() == 4) {
        double center = 0.25 * (v00 + v10 + v11 + v01);
        if ((center > level) == (v00 > level)) {
          link(e_bottom, e_right);
          link(e_top, e_left);
        } else {
          link(e_bottom, e_left);
          link(e_top, e_right);
        }
      } else {
        throw NumericError("mesh error: level passes exactly through a grid node");
      }
    }
  // chain into closed loops
  std::map<int, bool> used;
  for (const auto& [v, nb] : adj)
    if (nb.size() != 2)
      throw NumericError("mesh error: level-set chaining found an open strand");
  for (const auto& [start, nb0] : adj) {
    if (used[start]) continue;
    std::vector<int> loop;
    int prev = -1, cur = start;
    while (true) {
      loop.push_back(cur);
      used[cur] = true;
      const auto& nb = adj[cur];
      int nxt = (nb[0] == prev) ? nb[1] : nb[0];
      prev = cur;
      cur = nxt;
      if (cur == start) break;
    }
    s.loops.push_back(loop);
  }
  return s;
}

// Marching tetrahedra (6-tet Kuhn cubes) on the periodic grid of a flat
// 3-torus.
inline Slice torus3_level_set(const Manifold& m, double level, int grid) {
  double L = m.params()[0], h = L / grid;
  auto node_id = [&](int i, int j, int k) {
    i = (i % grid + grid) % grid;
    j = (j % grid + grid) % grid;
    k = (k % grid + grid) % grid;
    return (i * grid + j) * grid + k;
  };
  std::vector<double> fcache((std::size_t)grid * grid * grid, 1e300);
  auto fval = [&](int i, int j, int k) {
    int id = node_id(i, j, k);
    if (fcache[id] == 1e300)
      fcache[id] = m.morse_value(
          "height", vec3(((i % grid + grid) % grid) * h, ((j % grid + grid) % grid) * h,
                         ((k % grid + grid) % grid) * h));
    return fcache[id];
  };
  Slice s;
  s.dim = 2;
  std::map<std::pair<int, int>, int> edge_vertex;
  auto corner_pos = [&](const std::array<int, 3>& c) {
    return vec3(c[0] * h, c[1] * h, c[2] * h);
  };
  auto crossing = [&](const std::array<int, 3>& a, const std::array<int, 3>& b) {
    int ia = node_id(a[0], a[1], a[2]), ib = node_id(b[0], b[1], b[2]);
    auto key = std::minmax(ia, ib);
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    double fa = fval(a[0], a[1], a[2]), fb = fval(b[0], b[1], b[2]);
    double t = (level - fa) / (fb - fa);
    Vec p = corner_pos(a) + t * (corner_pos(b) - corner_pos(a));
    s.verts.push_back(m.project(p));
    int idx = (int)s.verts.size() - 1;
    edge_vertex[key] = idx;
    return idx;
  };
  static const int tets[6][4] = {{0, 1, 2, 6}, {0, 2, 3, 6}, {0, 3, 7, 6},
                                 {0, 7, 4, 6}, {0, 4, 5, 6}, {0, 5, 1, 6}};
  static const int corner_off[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                       {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j)
      for (int k = 0; k < grid; ++k) {
        std::array<std::array<int, 3>, 8> corner;
        std::array<double, 8> val;
        for (int c = 0; c < 8; ++c) {
          corner[c] = {i + corner_off[c][0], j + corner_off[c][1], k + corner_off[c][2]};
          val[c] = fval(corner[c][0], corner[c][1], corner[c][2]);
        }
        for (const auto& tet : tets) {
          int above[4], na = 0, below[4], nb = 0;
          for (int c = 0; c < 4; ++c)
            (val[tet[c]] > level ? above[na++] : below[nb++]) = tet[c];
          if (na == 0 || nb == 0) continue;
          if (na == 1 || nb == 1) {
            int apex = na == 1 ? above[0] : below[0];
            int* base = na == 1 ? below : above;
            int v0 = crossing(corner[apex], corner[base[0]]);
            int v1 = crossing(corner[apex], corner[base[1]]);
            int v2 = crossing(corner[apex], corner[base[2]]);
            s.tris.push_back({v0, v1, v2});
          } else {
            int v00 = crossing(corner[above[0]], corner[below[0]]);
            int v01 = crossing(corner[above[0]], corner[below[1]]);
            int v10 = crossing(corner[above[1]], corner[below[0]]);
            int v11 = crossing(corner[above[1]], corner[below[1]]);
            s.tris.push_back({v00, v01, v11});
            s.tris.push_back({v00, v11, v10});
          }
        }
      }
  return s;
}

inline int icosphere_subdiv_for(int mesh_res) {
  int s = 0;
  while (20 * (1 << (2 * s)) < mesh_res && s < 6) ++s;
  return s;
}

}  // namespace detail

// Builds the sweep-out of level sets of a built-in Morse function on a
// uniform K+1 grid; degenerate levels are snapped onto the grid, entered
// in T, and realized as point slices (extrema) or nearby regular levels
// with a singular mark (saddles).
inline SweepOut morse_sweepout(const Manifold& m, const std::string& morse_name, int K,
                               int mesh_res) {
  if (K < 16) throw DomainError("morse_sweepout: K must be at least 16");
  auto names = m.morse_function_names();
  if (std::find(names.begin(), names.end(), morse_name) == names.end())
    throw DomainError("morse_sweepout: unknown Morse function for this kind");

  auto [fmin, fmax] = m.morse_range(morse_name);
  auto critical = m.morse_critical_data(morse_name);
  SweepOut f;
  f.manifold = m;
  f.morse_name = morse_name;
  f.provenance = "morse-levels";

  std::vector<double> levels(K + 1);
  for (int i = 0; i <= K; ++i) levels[i] = fmin + (fmax - fmin) * i / K;
  // snap the nearest grid level onto each critical value
  std::vector<int> snapped;
  for (const auto& [cv, cp] : critical) {
    int best = 0;
    for (int i = 1; i <= K; ++i)
      if (std::abs(levels[i] - cv) < std::abs(levels[best] - cv)) best = i;
    levels[best] = cv;
    snapped.push_back(best);
  }

  double eps_off = 1e-6 * (fmax - fmin);
  for (int i = 0; i <= K; ++i) {
    f.times.push_back(double(i) / K);
    f.levels.push_back(levels[i]);
    const std::pair<double, Vec>* crit = nullptr;
    for (std::size_t c = 0; c < critical.size(); ++c)
      if (snapped[c] == i && critical[c].first == levels[i]) crit = &critical[c];
    if (crit) {
      f.singular_times.push_back(i);
      bool is_min = std::abs(crit->first - fmin) < 1e-12;
      bool is_max = std::abs(crit->first - fmax) < 1e-12;
      if (is_min || is_max) {
        f.slices.push_back(detail::point_slice(crit->second));
        continue;
      }
      // saddle: extract a regular level just past the critical value and
      // mark the vertex nearest to the critical point
      double lv = crit->first + eps_off;
      Slice s;
      switch (m.kind()) {
        case ManifoldKind::FlatTorus2: s = detail::torus2_level_set(m, lv, mesh_res); break;
        case ManifoldKind::FlatTorus3: s = detail::torus3_level_set(m, lv, mesh_res); break;
        default: s = detail::level_circle(m, lv, mesh_res); break;
      }
      int nearest = 0;
      for (std::size_t v = 1; v < s.verts.size(); ++v)
        if ((s.verts[v] - crit->second).norm() < (s.verts[nearest] - crit->second).norm())
          nearest = (int)v;
      s.singular_marks.push_back(nearest);
      f.slices.push_back(std::move(s));
      continue;
    }
    switch (m.kind()) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::Ellipsoid2:
        f.slices.push_back(detail::level_circle(m, levels[i], mesh_res));
        break;
      case ManifoldKind::RoundSphere3: {
        double r = m.params()[0];
        double rad = std::sqrt(std::max(0.0, sq(r) - sq(levels[i])));
        f.slices.push_back(
            icosphere_slice(rad, detail::icosphere_subdiv_for(mesh_res), levels[i]));
        break;
      }
      case ManifoldKind::FlatTorus2:
        f.slices.push_back(detail::torus2_level_set(m, levels[i], mesh_res));
        break;
      case ManifoldKind::FlatTorus3:
        f.slices.push_back(detail::torus3_level_set(m, levels[i], mesh_res));
        break;
    }
  }

  double fmax_measure = max_slice(f).second;
  f.delta_cont = 3.0 * fmax_measure / std::sqrt(double(K));
  f.h_cont = 3.0 * m.diameter_bound() / std::sqrt(double(K));
  f.singular_budget = std::max<int>(16, (int)critical.size());
  return f;
}

// ---- saturation moves -------------------------------------------------------------

// A time-dependent diffeomorphism surrogate psi(t, .) acting on the family.
struct FamilyDeformation {
  std::function<Vec(double t, const Vec&)> map;
  std::string label = "deformation";
};

// Applies psi(t, .) to every slice, reprojecting onto the manifold;
// injectivity surrogate: no segment/triangle inversion.  Grid, T, and the
// singular budget are preserved.
inline SweepOut apply_saturation_move(const SweepOut& f, const FamilyDeformation& plan) {
  SweepOut out = f;
  out.provenance = "deformed";
  for (std::size_t i = 0; i < f.slices.size(); ++i) {
    const Slice& s = f.slices[i];
    Slice ns = s;
    double t = f.times[i];
    for (std::size_t v = 0; v < s.verts.size(); ++v) {
      Vec y = plan.map(t, s.verts[v]);
      if ((y - s.verts[v]).norm() == 0.0) continue;  // keep untouched points bit-exact
      ns.verts[v] = f.manifold.project(y);
    }
    // inversion check per element
    if (s.dim == 1) {
      for (const auto& loop : s.loops) {
        std::size_t n = loop.size();
        for (std::size_t k = 0; k < n; ++k) {
          Vec e_old = s.verts[loop[(k + 1) % n]] - s.verts[loop[k]];
          Vec e_new = ns.verts[loop[(k + 1) % n]] - ns.verts[loop[k]];
          if (e_new.norm() < 1e-14 || e_new.dot(e_old) <= 0.0)
            throw NumericError("deformation too large: segment inversion at t=" +
                               std::to_string(t));
        }
      }
    } else {
      for (const auto& tr : s.tris) {
        Vec u = s.verts[tr[1]] - s.verts[tr[0]], v = s.verts[tr[2]] - s.verts[tr[0]];
        Vec u2 = ns.verts[tr[1]] - ns.verts[tr[0]], v2 = ns.verts[tr[2]] - ns.verts[tr[0]];
        u.normalize();
        Vec vp = v - v.dot(u) * u;
        vp.normalize();
        double det = u2.dot(u) * v2.dot(vp) - u2.dot(vp) * v2.dot(u);
        if (det <= 0.0)
          throw NumericError("deformation too large: triangle inversion at t=" +
                             std::to_string(t));
      }
    }
    out.slices[i] = std::move(ns);
  }
  auto val = validate_sweepout(out);
  if (!val.ok) throw NumericError("saturation move broke family continuity: " + val.message);
  return out;
}

// ---- isoperimetric lower bound -------------------------------------------------------

// Sharp-enough isoperimetric constants per kind (enclosed volume <= c *
// boundary^{d/(d-1)} with the half-volume optimum), padded by 2%.
inline double isoperimetric_constant(const Manifold& m) {
  switch (m.kind()) {
    case ManifoldKind::RoundSphere2: return 1.02 / (2.0 * kPi);
    case ManifoldKind::FlatTorus2: return 1.02 / 8.0;
    case ManifoldKind::Ellipsoid2: {
      double amin = std::min({m.params()[0], m.params()[1], m.params()[2]});
      return 1.02 * (m.total_volume() / 2.0) / sq(2.0 * kPi * amin);
    }
    case ManifoldKind::RoundSphere3: return 1.02 * std::sqrt(kPi) / 8.0;
    case ManifoldKind::FlatTorus3: return 1.02 / (4.0 * std::sqrt(2.0));
  }
  return 1.0;
}

// Euclidean constants (ball optimum): 1/(4 pi) in the plane, 1/(6 sqrt(pi))
// in space.
inline double euclidean_isoperimetric_constant(int slice_dim) {
  return slice_dim == 1 ? 1.0 / (4.0 * kPi) : 1.0 / (6.0 * std::sqrt(kPi));
}

struct IsoperimetricBound {
  double bound = 0.0;          // (Vol/2c)^{(d)/(d+1) exponent per dimension}
  double half_level = 0.0;     // Morse level with enclosed volume Vol/2
  int bisect_index = 0;        // grid slice nearest to the bisecting level
  double bisect_measure = 0.0; // the certificate: that slice's measure
  double constant = 0.0;
};

// Finds the half-volume level by monotone bisection over a fixed sample of
// Morse values (exactly monotone, deterministic), then evaluates the bound
// (Vol/2c)^{2/3} for surfaces slices and (Vol/2c)^{1/2} for curve slices.
inline IsoperimetricBound isoperimetric_lower_bound(const Manifold& m, const SweepOut& f,
                                                    double constant = 0.0,
                                                    int n_samples = 200000,
                                                    std::uint64_t seed = 71) {
  if (f.provenance != "morse-levels" || f.morse_name.empty())
    throw DomainError("isoperimetric bound needs a Morse-level sweep-out");
  bool any = false;
  for (const Slice& s : f.slices) any = any || !s.verts.empty() || !s.loops.empty();
  if (!any) throw DomainError("isoperimetric bound: degenerate (empty) family");

  IsoperimetricBound out;
  out.constant = constant > 0.0 ? constant : isoperimetric_constant(m);

  Rng rng(seed);
  std::vector<double> vals(n_samples);
  for (int i = 0; i < n_samples; ++i) vals[i] = m.morse_value(f.morse_name, m.sample_uniform(rng));
  std::nth_element(vals.begin(), vals.begin() + n_samples / 2, vals.end());
  out.half_level = vals[n_samples / 2];

  int dim = 0;
  for (const Slice& s : f.slices)
    if (!s.is_point_slice()) dim = s.dim;
  double vol = m.total_volume();
  double expo = dim == 2 ? 2.0 / 3.0 : 0.5;
  out.bound = std::pow(vol / (2.0 * out.constant), expo);

  out.bisect_index = 0;
  double best = 1e300;
  for (std::size_t i = 0; i < f.levels.size(); ++i) {
    double d = std::abs(f.levels[i] - out.half_level);
    if (d < best) {
      best = d;
      out.bisect_index = (int)i;
    }
  }
  out.bisect_measure = measure(f.slices[out.bisect_index]);
  return out;
}

// ---- serialization --------------------------------------------------------------------

inline nlohmann::json slice_to_json(const Slice& s) {
  nlohmann::json j;
  j["dim"] = s.dim;
  auto& vs = j["verts"] = nlohmann::json::array();
  for (const Vec& v : s.verts) vs.push_back({v[0], v[1], v[2], v[3]});
  j["loops"] = s.loops;
  auto& ts = j["tris"] = nlohmann::json::array();
  for (const auto& t : s.tris) ts.push_back({t[0], t[1], t[2]});
  j["singular_marks"] = s.singular_marks;
  return j;
}

inline Slice slice_from_json(const nlohmann::json& j) {
  Slice s;
  s.dim = j.at("dim").get<int>();
  for (const auto& v : j.at("verts")) s.verts.push_back(Vec(v[0], v[1], v[2], v[3]));
  s.loops = j.at("loops").get<std::vector<std::vector<int>>>();
  for (const auto& t : j.at("tris"))
    s.tris.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
  s.singular_marks = j.at("singular_marks").get<std::vector<int>>();
  return s;
}

inline nlohmann::json sweepout_to_json(const SweepOut& f) {
  nlohmann::json j;
  j["manifold"] = f.manifold.to_json();
  j["times"] = f.times;
  j["singular_times"] = f.singular_times;
  j["singular_budget"] = f.singular_budget;
  j["provenance"] = f.provenance;
  j["delta_cont"] = f.delta_cont;
  j["h_cont"] = f.h_cont;
  j["morse_name"] = f.morse_name;
  j["levels"] = f.levels;
  auto& sl = j["slices"] = nlohmann::json::array();
  for (const Slice& s : f.slices) sl.push_back(slice_to_json(s));
  return j;
}

inline SweepOut sweepout_from_json(const nlohmann::json& j) {
  SweepOut f;
  f.manifold = Manifold::from_json(j.at("manifold"));
  f.times = j.at("times").get<std::vector<double>>();
  f.singular_times = j.at("singular_times").get<std::vector<int>>();
  f.singular_budget = j.at("singular_budget").get<int>();
  f.provenance = j.at("provenance").get<std::string>();
  f.delta_cont = j.at("delta_cont").get<double>();
  f.h_cont = j.at("h_cont").get<double>();
  f.morse_name = j.at("morse_name").get<std::string>();
  f.levels = j.at("levels").get<std::vector<double>>();
  for (const auto& s : j.at("slices")) f.slices.push_back(slice_from_json(s));
  return f;
}

inline void write_area_csv(std::ostream& os, const SweepOut& f) {
  os << "t,measure\n";
  for (std::size_t i = 0; i < f.times.size(); ++i)
    os << f.times[i] << "," << measure(f.slices[i]) << "\n";
}

}  // namespace mmv
