#pragma once

// Local area minimization: constrained descent replacements in annuli
// (fixed boundary, stability via the discrete second-variation spectrum),
// coarea-based small-slice radius selection, radial squeeze maps with
// empirically certified constants, and the squeeze / conjugate / unsqueeze
// three-phase isotopy with per-phase excursion budgets.

#include "mmv/deform.hpp"

#include <nlohmann/json.hpp>

namespace mmv {

using AnnulusSpec = RegionSpec;  // inner > 0: the open annulus B_outer \ closure(B_inner)

// ---- clipped measures and coarea helpers -------------------------------------------

namespace detail {

// Length of the slice inside the metric ball; crossings located by
// bisection, so the result is exact up to 1e-13 of a segment.
inline double clipped_length(const Slice& s, const Domain& dom, const Vec& x, double R) {
  double total = 0.0;
  for (const auto& loop : s.loops) {
    std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec &a = s.verts[loop[i]], &b = s.verts[loop[(i + 1) % n]];
      double len = (b - a).norm();
      if (len < 1e-300) continue;
      const int NS = 16;
      double tprev = 0.0;
      bool inside = dom.distance(x, a) < R;
      for (int k = 1; k <= NS; ++k) {
        double t1 = double(k) / NS;
        bool in1 = dom.distance(x, a + t1 * (b - a)) < R;
        if (in1 != inside) {
          double lo = tprev, hi = t1;
          for (int it = 0; it < 48; ++it) {
            double mid = 0.5 * (lo + hi);
            bool inm = dom.distance(x, a + mid * (b - a)) < R;
            (inm == inside ? lo : hi) = mid;
          }
          double cross = 0.5 * (lo + hi);
          if (inside) total += (cross - tprev) * len;
          tprev = cross;
          inside = in1;
        }
        if (k == NS && inside) total += (t1 - tprev) * len;
      }
    }
  }
  return total;
}

// Count of crossings of the distance sphere of radius R (and the least
// crossing angle between the strand and the sphere).
inline int crossing_count(const Slice& s, const Domain& dom, const Vec& x, double R,
                          double* min_angle = nullptr) {
  int count = 0;
  if (min_angle) *min_angle = kPi / 2;
  for (const auto& loop : s.loops) {
    std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec &a = s.verts[loop[i]], &b = s.verts[loop[(i + 1) % n]];
      const int NS = 16;
      bool inside = dom.distance(x, a) < R;
      for (int k = 1; k <= NS; ++k) {
        bool in1 = dom.distance(x, a + (double(k) / NS) * (b - a)) < R;
        if (in1 != inside) {
          ++count;
          if (min_angle) {
            Vec mid = a + ((k - 0.5) / NS) * (b - a);
            Vec rad = dom.distance_gradient(x, mid);
            double si = std::min(1.0, std::abs(((b - a).normalized()).dot(rad)));
            *min_angle = std::min(*min_angle, std::asin(si));
          }
          inside = in1;
        }
      }
    }
  }
  return count;
}

// int_0^R H^0(slice cap dist-sphere_rho) drho as the total variation of
// min(d, R) along the curve; telescopes exactly on monotone pieces.
inline double coarea_integral(const Slice& s, const Domain& dom, const Vec& x, double R) {
  double tv = 0.0;
  for (const auto& loop : s.loops) {
    std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec &a = s.verts[loop[i]], &b = s.verts[loop[(i + 1) % n]];
      const int NS = 32;
      double prev = std::min(dom.distance(x, a), R);
      for (int k = 1; k <= NS; ++k) {
        double cur = std::min(dom.distance(x, a + (double(k) / NS) * (b - a)), R);
        tv += std::abs(cur - prev);
        prev = cur;
      }
    }
  }
  return tv;
}

// Iterates the NS^2 regular subtriangles of each face (centroid sampling).
template <typename F>
void for_subtriangles(const Slice& s, int NS, F&& visit) {
  for (const auto& t : s.tris) {
    const Vec &a = s.verts[t[0]], &b = s.verts[t[1]], &c = s.verts[t[2]];
    double subA = triangle_area(a, b, c) / (NS * NS);
    for (int i = 0; i < NS; ++i)
      for (int j = 0; i + j < NS; ++j) {
        Vec up = a + ((i + 1.0 / 3) / NS) * (b - a) + ((j + 1.0 / 3) / NS) * (c - a);
        visit(up, subA, t);
        if (i + j < NS - 1) {
          Vec down = a + ((i + 2.0 / 3) / NS) * (b - a) + ((j + 2.0 / 3) / NS) * (c - a);
          visit(down, subA, t);
        }
      }
  }
}

inline double clipped_area(const Slice& s, const Domain& dom, const Vec& x, double R) {
  double total = 0.0;
  for_subtriangles(s, 4, [&](const Vec& p, double A, const std::array<int, 3>&) {
    if (dom.distance(x, p) < R) total += A;
  });
  return total;
}

// Length of the sphere section of a mesh (marching-triangle crossings).
inline double mesh_sphere_section_length(const Slice& s, const Domain& dom, const Vec& x,
                                         double R, double* min_angle = nullptr) {
  double total = 0.0;
  if (min_angle) *min_angle = kPi / 2;
  for (const auto& t : s.tris) {
    const Vec* v[3] = {&s.verts[t[0]], &s.verts[t[1]], &s.verts[t[2]]};
    double d[3];
    for (int k = 0; k < 3; ++k) d[k] = dom.distance(x, *v[k]) - R;
    std::vector<Vec> pts;
    for (int k = 0; k < 3; ++k) {
      int k2 = (k + 1) % 3;
      if ((d[k] < 0) != (d[k2] < 0)) {
        double tt = d[k] / (d[k] - d[k2]);
        pts.push_back(*v[k] + tt * (*v[k2] - *v[k]));
      }
    }
    if (pts.size() == 2) {
      total += (pts[1] - pts[0]).norm();
      if (min_angle) {
        Vec u = (*v[1] - *v[0]).normalized();
        Vec w = *v[2] - *v[0];
        w -= w.dot(u) * u;
        w.normalize();
        Vec rad = dom.distance_gradient(x, 0.5 * (pts[0] + pts[1]));
        double si = std::min(1.0, std::hypot(rad.dot(u), rad.dot(w)));
        *min_angle = std::min(*min_angle, std::asin(si));
      }
    }
  }
  return total;
}

// int_0^R H^1(mesh cap dist-sphere_rho) drho = int_{mesh cap B_R} |grad_T d|.
inline double coarea_integral_mesh(const Slice& s, const Domain& dom, const Vec& x, double R) {
  double total = 0.0;
  for_subtriangles(s, 4, [&](const Vec& p, double A, const std::array<int, 3>& t) {
    if (dom.distance(x, p) >= R) return;
    const Vec &a = s.verts[t[0]], &b = s.verts[t[1]], &c = s.verts[t[2]];
    Vec u = (b - a).normalized();
    Vec w = c - a;
    w -= w.dot(u) * u;
    w.normalize();
    Vec rad = dom.distance_gradient(x, p);
    total += A * std::hypot(rad.dot(u), rad.dot(w));
  });
  return total;
}

}  // namespace detail

inline double slice_measure_in_ball(const Slice& s, const Domain& dom, const Vec& x, double R) {
  return s.dim == 1 ? detail::clipped_length(s, dom, x, R) : detail::clipped_area(s, dom, x, R);
}

// ---- replacements -----------------------------------------------------------------

struct ReplacementCertificate {
  double mass_out_delta = 0.0;    // elements fully outside: exact measure change
  double mass_total_delta = 0.0;  // total measure change (<= 0 on success)
  double residual = 0.0;          // max interior turning per unit length
  double stability_eig = 0.0;     // smallest eigenvalue of the second-variation form
  int iterations = 0;
  bool converged = true;

  nlohmann::json to_json() const {
    return {{"mass_out_delta", mass_out_delta}, {"mass_total_delta", mass_total_delta},
            {"residual", residual},             {"stability_eig", stability_eig},
            {"iterations", iterations},         {"converged", converged}};
  }
};

namespace detail {

inline double interior_residual(const Slice& s, const Manifold* m,
                                const std::vector<int>& free_verts) {
  if (free_verts.empty()) return 0.0;
  std::vector<Vec> g = measure_gradient(s);
  std::vector<double> feat = local_feature_size(s);
  double worst = 0.0;
  for (int i : free_verts) {
    Vec gi = m ? Vec(m->tangent_projector(s.verts[i]) * g[i]) : g[i];
    worst = std::max(worst, gi.norm() / std::max(feat[i], 1e-12));
  }
  return worst;
}

// Direction of allowed normal displacement per free vertex: inside the
// manifold tangent space and orthogonal to the slice's own tangent
// direction(s).
inline std::vector<Vec> stability_directions(const Slice& s, const Manifold* m,
                                             const std::vector<int>& free_verts) {
  std::vector<std::vector<Vec>> slice_tangents(s.verts.size());
  if (s.dim == 1) {
    for (const auto& loop : s.loops) {
      std::size_t n = loop.size();
      for (std::size_t i = 0; i < n; ++i) {
        Vec e = (s.verts[loop[(i + 1) % n]] - s.verts[loop[i]]).normalized();
        slice_tangents[loop[i]].push_back(e);
        slice_tangents[loop[(i + 1) % n]].push_back(e);
      }
    }
  } else {
    for (const auto& t : s.tris) {
      Vec u = (s.verts[t[1]] - s.verts[t[0]]).normalized();
      Vec w = s.verts[t[2]] - s.verts[t[0]];
      w -= w.dot(u) * u;
      w.normalize();
      for (int k = 0; k < 3; ++k) {
        slice_tangents[t[k]].push_back(u);
        slice_tangents[t[k]].push_back(w);
      }
    }
  }
  std::vector<Vec> dirs(s.verts.size(), Vec::Zero());
  for (int i : free_verts) {
    Mat P = m ? m->tangent_projector(s.verts[i]) : Mat(Mat::Identity());
    // orthonormalize the local slice tangents, subtract them from the
    // tangent space, keep the largest remaining direction
    std::vector<Vec> ortho;
    for (const Vec& t : slice_tangents[i]) {
      Vec w = t;
      for (const Vec& o : ortho) w -= w.dot(o) * o;
      if (w.norm() > 0.3) ortho.push_back(w.normalized());
    }
    Vec best = Vec::Zero();
    double bestn = -1.0;
    for (int k = 0; k < 4; ++k) {
      Vec e = Vec::Zero();
      e[k] = 1.0;
      Vec cand = P * e;
      for (const Vec& o : ortho) cand -= cand.dot(o) * o;
      if (cand.norm() > bestn) {
        bestn = cand.norm();
        best = cand;
      }
    }
    dirs[i] = bestn > 1e-9 ? Vec(best.normalized()) : Vec(Vec::Zero());
  }
  return dirs;
}

inline bool verts_adjacent(const Slice& s, int a, int b) {
  if (s.dim == 1) {
    for (const auto& loop : s.loops) {
      std::size_t n = loop.size();
      for (std::size_t i = 0; i < n; ++i) {
        int u = loop[i], v = loop[(i + 1) % n];
        if ((u == a && v == b) || (u == b && v == a)) return true;
      }
    }
    return false;
  }
  for (const auto& t : s.tris) {
    bool ha = t[0] == a || t[1] == a || t[2] == a;
    bool hb = t[0] == b || t[1] == b || t[2] == b;
    if (ha && hb) return true;
  }
  return false;
}

}  // namespace detail

// Constrained minimization inside the annulus with everything outside
// pinned bit-for-bit: Gauss-Seidel midpoint relaxation for curves, damped
// gradient descent for meshes; certificate with the mass bookkeeping, the
// interior residual, and the smallest second-variation eigenvalue.
inline std::pair<Slice, ReplacementCertificate> replace_in_annulus(
    const Slice& s, const Manifold* m, const Domain& dom, const AnnulusSpec& an,
    int budget = 20000, double residual_target = 1e-3) {
  double a_outer = kPi / 2, a_inner = kPi / 2;
  if (s.dim == 1) {
    detail::crossing_count(s, dom, an.center, an.outer, &a_outer);
    detail::crossing_count(s, dom, an.center, an.inner, &a_inner);
  } else {
    detail::mesh_sphere_section_length(s, dom, an.center, an.outer, &a_outer);
    detail::mesh_sphere_section_length(s, dom, an.center, an.inner, &a_inner);
  }
  if (std::min(a_outer, a_inner) < 1e-2)
    throw DomainError("replace_in_annulus: slice not transversal to the annulus boundary");

  std::vector<int> free_verts;
  for (std::size_t i = 0; i < s.verts.size(); ++i)
    if (an.contains(dom, s.verts[i])) free_verts.push_back((int)i);

  Slice out = s;
  ReplacementCertificate cert;
  double m0 = measure(s);
  if (free_verts.empty()) return {out, cert};

  std::vector<char> is_free(s.verts.size(), 0);
  for (int i : free_verts) is_free[i] = 1;

  double cur = m0;
  int it = 0;
  if (s.dim == 1) {
    // neighbor map for the Gauss-Seidel sweeps
    std::vector<std::array<int, 2>> nbr(s.verts.size(), {-1, -1});
    for (const auto& loop : out.loops) {
      std::size_t n = loop.size();
      for (std::size_t i = 0; i < n; ++i)
        nbr[loop[i]] = {loop[(i + n - 1) % n], loop[(i + 1) % n]};
    }
    double relax = 1.0;
    for (; it < budget; ++it) {
      Slice trial = out;
      for (int i : free_verts) {
        if (nbr[i][0] < 0) continue;
        Vec mid = 0.5 * (trial.verts[nbr[i][0]] + trial.verts[nbr[i][1]]);
        Vec y = trial.verts[i] + relax * (mid - trial.verts[i]);
        trial.verts[i] = m ? m->project(y) : y;
      }
      double mt = measure(trial);
      if (mt > cur * (1.0 + 1e-13)) {
        relax *= 0.5;
        if (relax < 1e-6) break;
        continue;
      }
      out = std::move(trial);
      cur = mt;
      if (it % 8 == 0 && detail::interior_residual(out, m, free_verts) <= residual_target)
        break;
    }
  } else {
    double relax = 0.4;
    for (; it < budget; ++it) {
      std::vector<Vec> g = measure_gradient(out);
      std::vector<double> feat = local_feature_size(out);
      double vmax = 0.0;
      for (int i : free_verts) {
        Vec gi = m ? Vec(m->tangent_projector(out.verts[i]) * g[i]) : g[i];
        vmax = std::max(vmax, gi.norm());
      }
      if (vmax < 1e-16) break;
      Slice trial = out;
      for (int i : free_verts) {
        Vec gi = m ? Vec(m->tangent_projector(out.verts[i]) * g[i]) : g[i];
        Vec y = out.verts[i] - relax * feat[i] * gi / vmax;
        trial.verts[i] = m ? m->project(y) : y;
      }
      double mt = measure(trial);
      if (mt > cur * (1.0 + 1e-13)) {
        relax *= 0.5;
        if (relax < 1e-8) break;
        continue;
      }
      out = std::move(trial);
      cur = mt;
      if (it % 16 == 0 && detail::interior_residual(out, m, free_verts) <= residual_target)
        break;
    }
  }
  cert.iterations = it;
  cert.residual = detail::interior_residual(out, m, free_verts);
  cert.converged = cert.residual <= residual_target;
  cert.mass_total_delta = cur - m0;

  auto outside_measure = [&](const Slice& sl) {
    double tot = 0.0;
    auto vout = [&](int i) { return !an.contains(dom, sl.verts[i]); };
    if (sl.dim == 1) {
      for (const auto& loop : sl.loops) {
        std::size_t n = loop.size();
        for (std::size_t i = 0; i < n; ++i)
          if (vout(loop[i]) && vout(loop[(i + 1) % n]))
            tot += (sl.verts[loop[(i + 1) % n]] - sl.verts[loop[i]]).norm();
      }
    } else {
      for (const auto& t : sl.tris)
        if (vout(t[0]) && vout(t[1]) && vout(t[2]))
          tot += triangle_area(sl.verts[t[0]], sl.verts[t[1]], sl.verts[t[2]]);
    }
    return tot;
  };
  cert.mass_out_delta = outside_measure(out) - outside_measure(s);

  // second-variation form over the free normal displacements (FD Hessian,
  // banded by adjacency)
  std::vector<Vec> dirs = detail::stability_directions(out, m, free_verts);
  int nf = (int)free_verts.size();
  if (nf > 0 && nf <= 400) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nf, nf);
    double h = 1e-4;
    std::vector<double> psi(nf, 0.0);
    auto energy = [&](const std::vector<double>& p) {
      Slice t2 = out;
      for (int k = 0; k < nf; ++k) {
        if (p[k] == 0.0) continue;
        Vec y = out.verts[free_verts[k]] + p[k] * dirs[free_verts[k]];
        t2.verts[free_verts[k]] = m ? m->project(y) : y;
      }
      return measure(t2);
    };
    double e0 = energy(psi);
    for (int a = 0; a < nf; ++a) {
      psi[a] = h;
      double ep = energy(psi);
      psi[a] = -h;
      double em = energy(psi);
      psi[a] = 0.0;
      H(a, a) = (ep - 2.0 * e0 + em) / (h * h);
      for (int b = a + 1; b < nf; ++b) {
        if (!detail::verts_adjacent(out, free_verts[a], free_verts[b])) continue;
        psi[a] = h;
        psi[b] = h;
        double epp = energy(psi);
        psi[b] = -h;
        double epm = energy(psi);
        psi[a] = -h;
        psi[b] = h;
        double emp = energy(psi);
        psi[b] = -h;
        double emm = energy(psi);
        psi[a] = psi[b] = 0.0;
        double hab = (epp - epm - emp + emm) / (4.0 * h * h);
        H(a, b) = hab;
        H(b, a) = hab;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    cert.stability_eig = es.eigenvalues().minCoeff();
  }
  if (!cert.converged)
    throw NumericError("replace_in_annulus: descent stagnated above the residual target");
  return {out, cert};
}

// ---- small-slice radius selection -----------------------------------------------------

struct SmallSliceCertificate {
  double tau = 0.0;
  double intersection_measure = 0.0;
  double min_angle = 0.0;
  double sigma = 0.0, s_outer = 0.0;  // interval on which the bound persists
  double ball_measure = 0.0;          // measure of the slice in B_{2 eps}
};

// Scans (eps, 2 eps) for a radius whose sphere section is small and
// transversal; the coarea budget in B_{2 eps} is the precondition.
inline SmallSliceCertificate small_slice_radius(const Slice& s, const Domain& dom, const Vec& x,
                                                double eps, double m0, int n_scan = 64,
                                                double angle_threshold = 1e-2) {
  SmallSliceCertificate cert;
  int d = s.dim;
  cert.ball_measure = slice_measure_in_ball(s, dom, x, 2.0 * eps);
  double budget = 5.0 * m0 * (d == 1 ? eps : eps * eps);
  if (cert.ball_measure >= budget)
    throw DomainError("small_slice_radius: coarea budget exceeded in B_2eps");
  double bound = 10.0 * m0 * (d == 1 ? 1.0 : eps);

  std::vector<bool> ok(n_scan, false);
  std::vector<double> taus(n_scan), meas(n_scan), angs(n_scan);
  for (int i = 0; i < n_scan; ++i) {
    double tau = eps + eps * (i + 0.5) / n_scan;
    taus[i] = tau;
    double ang = kPi / 2;
    double im = d == 1 ? detail::crossing_count(s, dom, x, tau, &ang)
                       : detail::mesh_sphere_section_length(s, dom, x, tau, &ang);
    meas[i] = im;
    angs[i] = im > 0.0 ? ang : kPi / 2;
    ok[i] = im < bound && angs[i] > angle_threshold;
  }
  int best = -1;
  for (int i = 0; i < n_scan; ++i)
    if (ok[i] && (best < 0 || meas[i] < meas[best])) best = i;
  if (best < 0)
    throw NumericError("small_slice_radius: no admissible radius at this scan resolution");
  int lo = best, hi = best;
  while (lo > 0 && ok[lo - 1]) --lo;
  while (hi + 1 < n_scan && ok[hi + 1]) ++hi;
  cert.tau = taus[best];
  cert.intersection_measure = meas[best];
  cert.min_angle = angs[best];
  cert.sigma = taus[lo];
  cert.s_outer = taus[hi];
  return cert;
}

// ---- squeeze maps ---------------------------------------------------------------------

struct SqueezeSpec {
  Vec center = Vec::Zero();
  double eps = 0.0;      // base scale; the inner isotopy lives in B_eps
  double sigma = 0.0;    // full-contraction radius, eps < sigma
  double s_outer = 0.0;  // support radius, sigma < s_outer < 2 eps

  // f(t, .): 1 - t on [0, sigma], 1 on [s_outer, inf), monotone quintic
  // ramp in between.
  double profile(double t, double r) const {
    if (r <= sigma) return 1.0 - t;
    if (r >= s_outer) return 1.0;
    return (1.0 - t) + t * smoothstep5((r - sigma) / (s_outer - sigma));
  }

  void validate(const Manifold* m) const {
    if (!(0.0 < eps && eps < sigma && sigma < s_outer && s_outer < 2.0 * eps))
      throw DomainError("squeeze spec: need eps < sigma < s_outer < 2 eps");
    if (m && s_outer >= m->inj_radius_bound())
      throw DomainError("squeeze spec: support exceeds the injectivity bound");
  }
};

// The radial dilation I_eta around x: exp_x(eta * log_x(y)).
inline Vec radial_dilation(const Manifold* m, const Vec& x, double eta, const Vec& y) {
  if (!m) return x + eta * (y - x);
  return m->exp_map(x, eta * m->log_map(x, y));
}

inline Vec squeeze_point(const SqueezeSpec& spec, double t, const Manifold* m,
                         const Domain& dom, const Vec& y) {
  double d = dom.distance(spec.center, y);
  if (d >= spec.s_outer) return y;
  return radial_dilation(m, spec.center, spec.profile(t, d), y);
}

// Radial inverse of the squeeze at parameter t (bisection on the monotone
// profile r -> f(t, r) r).
inline Vec squeeze_point_inverse(const SqueezeSpec& spec, double t, const Manifold* m,
                                 const Domain& dom, const Vec& y) {
  double dy = dom.distance(spec.center, y);
  if (dy >= spec.s_outer || dy < 1e-300) return y;
  double lo = 0.0, hi = spec.s_outer;
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    (spec.profile(t, mid) * mid < dy ? lo : hi) = mid;
  }
  double r0 = 0.5 * (lo + hi);
  return radial_dilation(m, spec.center, r0 / dy, y);
}

struct SqueezeOutcome {
  Slice slice;
  int collisions_snapped = 0;  // vertices collapsed onto the center at t -> 1
};

// psi(t, .): identity outside B_{s_outer}, radial contraction by
// f(t, d(center, .)) inside.  Vertex collisions at full squeeze snap to the
// center and acquire a singular mark.
inline SqueezeOutcome squeeze_isotopy(const SqueezeSpec& spec, const Slice& s, double t,
                                      const Manifold* m, const Domain& dom) {
  spec.validate(m);
  if (t < 0.0 || t > 1.0) throw RangeError("squeeze_isotopy: t outside [0,1]");
  SqueezeOutcome out;
  out.slice = map_slice(s, [&](const Vec& y) { return squeeze_point(spec, t, m, dom, y); });
  if (t >= 1.0 - 1e-12) {
    for (std::size_t i = 0; i < out.slice.verts.size(); ++i)
      for (std::size_t j = i + 1; j < out.slice.verts.size(); ++j)
        if ((out.slice.verts[i] - out.slice.verts[j]).norm() < 1e-12 &&
            (s.verts[i] - s.verts[j]).norm() > 1e-12) {
          out.slice.verts[i] = spec.center;
          out.slice.verts[j] = spec.center;
          ++out.collisions_snapped;
          if (std::find(out.slice.singular_marks.begin(), out.slice.singular_marks.end(),
                        (int)i) == out.slice.singular_marks.end())
            out.slice.singular_marks.push_back((int)i);
        }
  }
  return out;
}

struct SqueezeTrace {
  std::vector<std::pair<double, double>> trace;  // (t, measure)
  double max_excursion = 0.0;
  double c_hat = 0.0;  // max excursion / eps^2
};

inline SqueezeTrace squeeze_excursion_trace(const SqueezeSpec& spec, const Slice& s,
                                            const Manifold* m, const Domain& dom,
                                            int n_samples = 17) {
  SqueezeTrace tr;
  double m0 = measure(s);
  for (int k = 0; k <= n_samples; ++k) {
    double t = double(k) / n_samples;
    double mm = measure(squeeze_isotopy(spec, s, t, m, dom).slice);
    tr.trace.emplace_back(t, mm);
    tr.max_excursion = std::max(tr.max_excursion, mm - m0);
  }
  tr.c_hat = tr.max_excursion / sq(spec.eps);
  return tr;
}

// ---- empirical squeeze constants -------------------------------------------------------

struct SqueezeConstants {
  std::vector<std::pair<double, double>> mu_by_radius;  // (r, mu(r))
  double mu = 1.0;
};

// Maximizes the dilation / sphere-section / coarea ratios over sampled test
// strands (radial and offset geodesics, tangential circles; geodesic
// sphere patches for 3-manifolds) and radii.
inline SqueezeConstants verify_squeeze_constants(const Manifold& m,
                                                 const std::vector<double>& radii) {
  SqueezeConstants out;
  Domain dom = Domain::on_manifold(m);
  Vec x;
  switch (m.kind()) {
    case ManifoldKind::RoundSphere2: x = vec3(0, 0, m.params()[0]); break;
    case ManifoldKind::Ellipsoid2: x = vec3(0, 0, m.params()[2]); break;
    case ManifoldKind::FlatTorus2: x = m.torus2_embed(0.31 * m.params()[0], 0.4 * m.params()[0]); break;
    case ManifoldKind::RoundSphere3: x = Vec(m.params()[0], 0, 0, 0); break;
    case ManifoldKind::FlatTorus3:
      x = vec3(0.31 * m.params()[0], 0.4 * m.params()[0], 0.5 * m.params()[0]);
      break;
  }
  auto basis = m.tangent_basis(x);

  auto open_strand = [&](const Vec& start, const Vec& dir, double len, int n) {
    // an open geodesic strand stored as a degenerate out-and-back loop;
    // only clipped lengths are read off it (halved at the end)
    Slice s;
    s.dim = 1;
    std::vector<int> loop;
    Vec p = m.project(start);
    Vec v = dir;
    double step = len / n;
    for (int i = 0; i <= n; ++i) {
      loop.push_back((int)s.verts.size());
      s.verts.push_back(p);
      if (i < n) {
        auto [pn, vn] = m.shoot_geodesic(p, v, step);
        p = pn;
        v = vn;
      }
    }
    for (int i = n - 1; i > 0; --i) loop.push_back(i);
    s.loops.push_back(loop);
    return s;
  };

  auto dilate_slice = [&](const Slice& sl, double r, double eta) {
    return map_slice(sl, [&](const Vec& y) {
      if (m.geodesic_distance(x, y) >= r) return y;
      return radial_dilation(&m, x, eta, y);
    });
  };

  bool three_d = m.dim() == 3;
  for (double r : radii) {
    double mu_r = 1.0;
    for (double eta : {0.25, 0.5, 0.75}) {
      for (std::size_t dir = 0; dir < basis.size(); ++dir) {
        Slice strand = open_strand(m.exp_map(x, -1.2 * r * basis[dir]), basis[dir], 2.4 * r, 96);
        double lin = detail::clipped_length(strand, dom, x, r);
        double lout = detail::clipped_length(dilate_slice(strand, r, eta), dom, x, eta * r);
        if (lin > 1e-12) mu_r = std::max(mu_r, lout / (eta * lin));
        double co = detail::coarea_integral(strand, dom, x, r);
        if (co > 1e-12) mu_r = std::max(mu_r, lin / co);
      }
      {
        // offset strand: transversal but missing x
        Vec off = m.exp_map(x, 0.4 * r * basis[0]);
        Slice strand = open_strand(m.exp_map(off, -1.2 * r * basis[1]),
                                   m.tangent_projector(off) * basis[1], 2.4 * r, 96);
        double lin = detail::clipped_length(strand, dom, x, r);
        double lout = detail::clipped_length(dilate_slice(strand, r, eta), dom, x, eta * r);
        if (lin > 1e-12) mu_r = std::max(mu_r, lout / (eta * lin));
        int c0 = detail::crossing_count(strand, dom, x, 0.8 * r);
        int c1 = detail::crossing_count(dilate_slice(strand, r, eta), dom, x, eta * 0.8 * r);
        if (c0 > 0) mu_r = std::max(mu_r, double(c1) / double(c0));
      }
      for (double rho : {0.4 * r, 0.7 * r}) {
        // tangential circle around x: the worst tangential stretch
        Slice circ;
        circ.dim = 1;
        std::vector<int> loop;
        const int n = 128;
        for (int i = 0; i < n; ++i) {
          double th = 2.0 * kPi * i / n;
          loop.push_back(i);
          circ.verts.push_back(m.exp_map(x, rho * (std::cos(th) * basis[0] + std::sin(th) * basis[1])));
        }
        circ.loops.push_back(loop);
        Slice cimg = map_slice(circ, [&](const Vec& y) { return radial_dilation(&m, x, eta, y); });
        mu_r = std::max(mu_r, measure(cimg) / (eta * measure(circ)));
      }
      if (three_d) {
        // totally geodesic 2-sphere patch through x (the x4 = 0 equator for
        // the round 3-sphere), area and section ratios
        if (m.kind() == ManifoldKind::RoundSphere3) {
          Slice patch = icosphere_slice(m.params()[0], 3, 0.0);
          double ain = detail::clipped_area(patch, dom, x, r);
          Slice pimg = map_slice(patch, [&](const Vec& y) {
            if (m.geodesic_distance(x, y) >= r) return y;
            return radial_dilation(&m, x, eta, y);
          });
          double aout = detail::clipped_area(pimg, dom, x, eta * r);
          if (ain > 1e-12) mu_r = std::max(mu_r, aout / (eta * eta * ain));
          double l0 = detail::mesh_sphere_section_length(patch, dom, x, 0.8 * r);
          double l1 = detail::mesh_sphere_section_length(pimg, dom, x, eta * 0.8 * r);
          if (l0 > 1e-12) mu_r = std::max(mu_r, l1 / (eta * l0));
          double co = detail::coarea_integral_mesh(patch, dom, x, r);
          if (co > 1e-12) mu_r = std::max(mu_r, ain / co);
        }
      }
    }
    out.mu_by_radius.emplace_back(r, mu_r);
    out.mu = std::max(out.mu, mu_r);
  }
  return out;
}

// ---- the three-phase isotopy ------------------------------------------------------------

struct ThreePhaseResult {
  Slice endpoint;
  std::vector<std::pair<double, double>> trace;  // (path parameter in [0,3], measure)
  double t = 0.0;                                // derived shrink parameter
  double phase_excursion[3] = {0, 0, 0};
  bool k_capped = false;
  double unit = 0.0;
};

// Squeeze to scale (1-t), apply the (1-t)-conjugated inner isotopy, then
// magnify back.  The endpoint coincides with the inner map applied
// directly; each phase respects its excursion budget (1/32, 1/32, 1/16 of
// the measure unit).
inline ThreePhaseResult three_phase_isotopy(const SqueezeSpec& spec,
                                            const IsotopyGenerator& inner, const Slice& s,
                                            const Manifold* m, const Domain& dom, double mu,
                                            double measure_unit = 0.0, int n_samples = 12) {
  spec.validate(m);
  if (inner.support.outer > spec.eps + 1e-12 ||
      dom.distance(inner.support.center, spec.center) >
          spec.eps - inner.support.outer + 1e-9)
    throw DomainError("three_phase_isotopy: inner isotopy not supported in B_eps");
  ThreePhaseResult out;
  double m0 = measure(s);
  double unit = measure_unit > 0.0 ? measure_unit : m0;
  out.unit = unit;
  {
    Slice end_inner = map_slice(s, [&](const Vec& y) { return inner.map(1.0, y); });
    if (measure(end_inner) > m0 + 1e-12)
      throw DomainError("three_phase_isotopy: inner isotopy increases the final measure");
  }
  SqueezeTrace str = squeeze_excursion_trace(spec, s, m, dom, 8);
  if (mu * str.c_hat * sq(spec.eps) >= unit / 32.0)
    throw DomainError("three_phase_isotopy: squeeze constants violate the 1/32 budget");

  // K: the largest measure the inner isotopy ever places inside B_sigma
  double K = 0.0;
  for (int q = 0; q <= 8; ++q) {
    Slice moved = map_slice(s, [&](const Vec& y) { return inner.map(double(q) / 8.0, y); });
    K = std::max(K, slice_measure_in_ball(moved, dom, spec.center, spec.sigma));
  }
  if (K > m0) {
    K = m0;
    out.k_capped = true;
  }
  double t = K < 1e-12 ? 0.0 : std::max(0.0, 1.0 - std::sqrt(std::min(1.0, unit / (32.0 * mu * K))));
  out.t = t;

  auto conjugated_inner = [&](double lam, const Vec& y) -> Vec {
    if (t <= 1e-15) return inner.map(lam, y);
    double d = dom.distance(spec.center, y);
    if (d >= (1.0 - t) * spec.eps) return y;
    Vec y0 = radial_dilation(m, spec.center, 1.0 / (1.0 - t), y);
    Vec y1 = inner.map(lam, y0);
    return radial_dilation(m, spec.center, 1.0 - t, y1);
  };

  auto apply_phase = [&](int phase, double lam) -> Slice {
    if (phase == 0) return squeeze_isotopy(spec, s, lam * t, m, dom).slice;
    Slice sq = squeeze_isotopy(spec, s, t, m, dom).slice;
    Slice conj = map_slice(sq, [&](const Vec& y) {
      return conjugated_inner(phase == 1 ? lam : 1.0, y);
    });
    if (phase == 1) return conj;
    return map_slice(conj, [&](const Vec& y) {
      Vec y0 = squeeze_point_inverse(spec, t, m, dom, y);
      return squeeze_point(spec, (1.0 - lam) * t, m, dom, y0);
    });
  };

  for (int phase = 0; phase < 3; ++phase) {
    for (int q = 0; q <= n_samples; ++q) {
      double lam = double(q) / n_samples;
      Slice st = apply_phase(phase, lam);
      double mm = measure(st);
      out.trace.emplace_back(phase + lam, mm);
      out.phase_excursion[phase] = std::max(out.phase_excursion[phase], mm - m0);
      if (phase == 2 && q == n_samples) out.endpoint = std::move(st);
    }
    double budget = phase == 2 ? unit / 16.0 : unit / 32.0;
    if (out.phase_excursion[phase] > budget + 1e-12)
      throw NumericError("three_phase_isotopy: phase " + std::to_string(phase + 1) +
                         " exceeded its excursion budget");
  }
  return out;
}

}  // namespace mmv
