#pragma once

// Discrete varifold calculus: weighted (point, unoriented plane) atoms,
// mass and pushforward, first variation against closed-form fields, a
// fixed-dictionary integral-probe pseudometric, monotonicity ratios,
// dilations with tangent-plane verdicts, and the smoothness /
// maximum-principle / transversality diagnostics.

#include "mmv/fields.hpp"
#include "mmv/slice.hpp"

#include <memory>
#include <numeric>

namespace mmv {

// ---- domains ----------------------------------------------------------------

struct Domain {
  enum class Type { Euclidean, OnManifold };
  Type type = Type::Euclidean;
  int edim = 2;         // active coordinates when Euclidean
  double radius = 0.0;  // bounding radius of the Euclidean disk/ball (0 = unbounded)
  std::shared_ptr<const Manifold> manifold;

  static Domain euclidean(int dim, double radius_ = 0.0) {
    Domain d;
    d.type = Type::Euclidean;
    d.edim = dim;
    d.radius = radius_;
    return d;
  }
  static Domain on_manifold(const Manifold& m) {
    Domain d;
    d.type = Type::OnManifold;
    d.manifold = std::make_shared<Manifold>(m);
    d.edim = m.embed_dim();
    return d;
  }

  double distance(const Vec& a, const Vec& b) const {
    if (type == Type::Euclidean) return (a - b).norm();
    return manifold->geodesic_distance(a, b);
  }

  // Unit gradient of y -> d(x, y), evaluated at y.
  Vec distance_gradient(const Vec& x, const Vec& y) const {
    if (type == Type::Euclidean) return normalized_or_zero(y - x);
    Vec u = manifold->log_map(y, x);
    return normalized_or_zero(Vec(-u));
  }

  // Bound on |coordinates| over the domain; fixes probe normalization.
  double coord_bound() const {
    if (type == Type::Euclidean) return radius > 0.0 ? radius : 2.0;
    switch (manifold->kind()) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::RoundSphere3: return manifold->params()[0];
      case ManifoldKind::Ellipsoid2: {
        const auto& p = manifold->params();
        return std::max({p[0], p[1], p[2]});
      }
      case ManifoldKind::FlatTorus2: return manifold->clifford_radius() * std::sqrt(2.0);
      case ManifoldKind::FlatTorus3: return manifold->params()[0] * std::sqrt(3.0);
    }
    return 2.0;
  }
};

// ---- atoms ------------------------------------------------------------------

struct Atom {
  Vec x = Vec::Zero();
  Vec t1 = Vec::Zero();  // unit direction (1-d) / first basis vector (2-d)
  Vec t2 = Vec::Zero();  // second orthonormal basis vector (2-d only)
  double w = 0.0;
};

inline void canonicalize(Atom& a, int dim) {
  a.t1.normalize();
  if (dim == 2) {
    a.t2 -= a.t2.dot(a.t1) * a.t1;
    a.t2.normalize();
    a.t2 = canonical_direction(a.t2);
  }
  a.t1 = canonical_direction(a.t1);
}

// Projector onto the atom's plane.
inline Mat atom_projector(const Atom& a, int dim) {
  Mat P = a.t1 * a.t1.transpose();
  if (dim == 2) P += a.t2 * a.t2.transpose();
  return P;
}

struct DiscreteVarifold {
  int dim = 1;  // dimension of the atoms' planes
  Domain domain = Domain::euclidean(2);
  std::vector<Atom> atoms;
  int skipped_degenerate = 0;

  double mass() const {
    double m = 0.0;
    for (const Atom& a : atoms) m += a.w;
    return m;
  }
};

// ---- construction from slices ------------------------------------------------

namespace detail {

// Gauss-Legendre nodes/weights on [0,1], orders 1..5.
inline const std::vector<std::pair<double, double>>& gauss01(int order) {
  static const std::vector<std::vector<std::pair<double, double>>> tables = {
      {{0.5, 1.0}},
      {{0.21132486540518711775, 0.5}, {0.78867513459481288225, 0.5}},
      {{0.11270166537925831148, 0.27777777777777777778},
       {0.5, 0.44444444444444444444},
       {0.88729833462074168852, 0.27777777777777777778}},
      {{0.069431844202973712388, 0.17392742256872692869},
       {0.33000947820757186760, 0.32607257743127307131},
       {0.66999052179242813240, 0.32607257743127307131},
       {0.93056815579702628761, 0.17392742256872692869}},
      {{0.046910077030668003601, 0.11846344252809454376},
       {0.23076534494715845448, 0.23931433524968323402},
       {0.5, 0.28444444444444444444},
       {0.76923465505284154552, 0.23931433524968323402},
       {0.95308992296933199640, 0.11846344252809454376}}};
  int i = std::clamp(order, 1, 5) - 1;
  return tables[i];
}

// Symmetric degree-2 triangle rule (3 points, weights 1/3).
inline const std::vector<std::array<double, 3>>& tri_nodes(int order) {
  static const std::vector<std::array<double, 3>> one = {{1.0 / 3, 1.0 / 3, 1.0 / 3}};
  static const std::vector<std::array<double, 3>> three = {
      {2.0 / 3, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 2.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 2.0 / 3}};
  return order <= 1 ? one : three;
}

}  // namespace detail

// One atom per quadrature node of each segment/triangle; weights per element
// sum exactly to the element measure, atom planes follow the element.
inline DiscreteVarifold from_slice(const Slice& s, int quad_order, Domain domain) {
  DiscreteVarifold V;
  V.dim = s.dim;
  V.domain = std::move(domain);
  if (s.dim == 1) {
    for (const auto& loop : s.loops) {
      std::size_t n = loop.size();
      for (std::size_t i = 0; i < n; ++i) {
        const Vec &a = s.verts[loop[i]], &b = s.verts[loop[(i + 1) % n]];
        double len = (b - a).norm();
        if (len < 1e-14) {
          ++V.skipped_degenerate;
          continue;
        }
        Vec t = (b - a) / len;
        for (auto [node, wq] : detail::gauss01(quad_order)) {
          Atom at;
          at.x = a + node * (b - a);
          at.t1 = t;
          at.w = wq * len;
          canonicalize(at, 1);
          V.atoms.push_back(at);
        }
      }
    }
  } else {
    for (const auto& tr : s.tris) {
      const Vec &a = s.verts[tr[0]], &b = s.verts[tr[1]], &c = s.verts[tr[2]];
      double area = triangle_area(a, b, c);
      if (area < 1e-14) {
        ++V.skipped_degenerate;
        continue;
      }
      Vec u = (b - a).normalized();
      Vec v = c - a;
      v -= v.dot(u) * u;
      v.normalize();
      double wq = 1.0 / double(detail::tri_nodes(quad_order).size());
      for (const auto& bc : detail::tri_nodes(quad_order)) {
        Atom at;
        at.x = bc[0] * a + bc[1] * b + bc[2] * c;
        at.t1 = u;
        at.t2 = v;
        at.w = wq * area;
        canonicalize(at, 2);
        V.atoms.push_back(at);
      }
    }
  }
  return V;
}

// ---- diffeomorphism surrogates -------------------------------------------------

struct DiffeoMap {
  std::function<Vec(const Vec&)> f;
  std::function<Mat(const Vec&)> jac_fn;  // empty -> central finite differences
  double fd_step = 1e-5;

  Vec operator()(const Vec& x) const { return f(x); }

  Mat jacobian(const Vec& x) const {
    if (jac_fn) return jac_fn(x);
    Mat J = Mat::Zero();
    for (int k = 0; k < 4; ++k) {
      Vec xp = x, xm = x;
      xp[k] += fd_step;
      xm[k] -= fd_step;
      J.col(k) = (f(xp) - f(xm)) / (2.0 * fd_step);
    }
    return J;
  }

  static DiffeoMap identity() {
    return {[](const Vec& x) { return x; }, [](const Vec&) { return Mat(Mat::Identity()); }};
  }

  // Time-t map of a field: x -> x + t chi(x).
  static DiffeoMap field_time_map(const TestField& chi, double t) {
    auto c = std::make_shared<TestField>(chi);
    DiffeoMap m;
    m.f = [c, t](const Vec& x) -> Vec { return x + t * c->eval(x); };
    m.jac_fn = [c, t](const Vec& x) -> Mat { return Mat::Identity() + t * c->jacobian(x); };
    if (!c->has_analytic_jacobian()) m.jac_fn = nullptr;
    return m;
  }

  static DiffeoMap compose(const DiffeoMap& outer, const DiffeoMap& inner) {
    auto o = std::make_shared<DiffeoMap>(outer);
    auto i = std::make_shared<DiffeoMap>(inner);
    DiffeoMap m;
    m.f = [o, i](const Vec& x) { return o->f(i->f(x)); };
    if (outer.jac_fn && inner.jac_fn)
      m.jac_fn = [o, i](const Vec& x) -> Mat { return o->jac_fn(i->f(x)) * i->jac_fn(x); };
    return m;
  }
};

// Atoms mapped, weights scaled by the Jacobian restricted to the atom plane,
// planes mapped by the differential and re-orthonormalized.
inline DiscreteVarifold pushforward(const DiscreteVarifold& V, const DiffeoMap& psi) {
  DiscreteVarifold W = V;
  for (Atom& a : W.atoms) {
    Mat J = psi.jacobian(a.x);
    a.x = psi(a.x);
    if (V.dim == 1) {
      Vec u = J * a.t1;
      double lam = u.norm();
      if (lam < 1e-14) throw NumericError("pushforward: map collapses an atom direction");
      a.t1 = u / lam;
      a.w *= lam;
    } else {
      Vec u = J * a.t1, v = J * a.t2;
      double g = u.squaredNorm() * v.squaredNorm() - sq(u.dot(v));
      if (g < 1e-28) throw NumericError("pushforward: map collapses an atom plane");
      double area_el = std::sqrt(g);
      a.t1 = u.normalized();
      v -= v.dot(a.t1) * a.t1;
      a.t2 = v.normalized();
      a.w *= area_el;
    }
    canonicalize(a, V.dim);
  }
  return W;
}

// ---- first variation -----------------------------------------------------------

// delta V (chi) = sum_atoms w * tr(D chi(x) | plane).
inline double first_variation(const DiscreteVarifold& V, const TestField& chi) {
  double s = 0.0;
  for (const Atom& a : V.atoms) {
    Mat D = chi.jacobian(a.x);
    double tr = a.t1.dot(D * a.t1);
    if (V.dim == 2) tr += a.t2.dot(D * a.t2);
    s += a.w * tr;
  }
  return s;
}

// max over the dictionary of (-delta V)^+; zero exactly on varifolds that are
// stationary against the dictionary's span.
inline double dictionary_residual(const DiscreteVarifold& V,
                                  const std::vector<TestField>& dict,
                                  const TestField** argmax = nullptr) {
  double best = 0.0;
  if (argmax) *argmax = nullptr;
  for (const TestField& f : dict) {
    double d = -first_variation(V, f);
    if (d > best) {
      best = d;
      if (argmax) *argmax = &f;
    }
  }
  return best;
}

// ---- the standard field dictionary ----------------------------------------------

// Closed-form fields adapted to the domain: compactly supported bump-cut
// polynomials on Euclidean disks/balls, tangent-projected polynomials on
// embedded manifolds, trigonometric fields on periodic cubes.  All entries
// carry analytic Jacobians and sup-norm <= 1.
inline std::vector<TestField> standard_dictionary(const Domain& dom) {
  std::vector<TestField> out;
  auto e = [](int i) {
    Vec v = Vec::Zero();
    v[i] = 1.0;
    return v;
  };
  if (dom.type == Domain::Type::Euclidean) {
    int k = dom.edim;
    double R = dom.radius > 0.0 ? dom.radius : 2.0;
    Vec c0 = Vec::Zero();
    auto add = [&](TestField f, double bound) {
      out.push_back(bump_cut(scale_field(std::move(f), 1.0 / bound), c0, R));
    };
    for (int i = 0; i < k; ++i) add(constant_field("e" + std::to_string(i), e(i)), 1.0);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        Mat A = Mat::Zero();
        A(i, j) = 1.0;
        add(linear_field("x" + std::to_string(j) + "e" + std::to_string(i), A), R);
      }
    add(linear_field("radial", Mat(Mat::Identity())), R);
    for (int i = 0; i < k; ++i)
      add(bump_dir_field("bump-e" + std::to_string(i), c0, 0.5 * R, e(i)), 1.0);
    add(bump_radial_field("bump-radial", c0, 0.5 * R), 0.3 * R);
  } else {
    const Manifold& m = *dom.manifold;
    int k = m.embed_dim();
    double B = dom.coord_bound();
    if (m.kind() == ManifoldKind::FlatTorus3) {
      double L = m.params()[0];
      for (int i = 0; i < 3; ++i) out.push_back(constant_field("e" + std::to_string(i), e(i)));
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double om = 2.0 * kPi / L;
          for (int phase = 0; phase < 2; ++phase) {
            std::string id = (phase ? "cos" : "sin") + std::to_string(i) + "e" + std::to_string(j);
            Vec dir = e(j);
            auto eval = [i, om, phase, dir](const Vec& x) -> Vec {
              double s = phase ? std::cos(om * x[i]) : std::sin(om * x[i]);
              return s * dir;
            };
            auto jac = [i, om, phase, dir, e](const Vec& x) -> Mat {
              double ds = phase ? -om * std::sin(om * x[i]) : om * std::cos(om * x[i]);
              return dir * (ds * e(i).transpose());
            };
            out.push_back({id, eval, jac});
          }
        }
      return out;
    }
    for (int i = 0; i < k; ++i)
      out.push_back(tangent_project(constant_field("e" + std::to_string(i), e(i)), m));
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        Mat A = Mat::Zero();
        A(i, j) = 1.0;
        out.push_back(tangent_project(
            scale_field(linear_field("x" + std::to_string(j) + "e" + std::to_string(i), A), 1.0 / B),
            m));
      }
  }
  return out;
}

// ---- the integral-probe pseudometric ---------------------------------------------

namespace detail {

struct GrassProbe {
  std::array<int, 4> expo{};  // monomial exponents, total degree <= 3
  int pi = -1, pj = -1;       // projector entry; (-1,-1) = constant plane part
  double inv_norm = 1.0;
};

inline std::vector<GrassProbe> probe_dictionary(double B) {
  std::vector<GrassProbe> probes;
  std::vector<std::array<int, 4>> monos;
  for (int a = 0; a <= 3; ++a)
    for (int b = 0; a + b <= 3; ++b)
      for (int c = 0; a + b + c <= 3; ++c)
        for (int d = 0; a + b + c + d <= 3; ++d) monos.push_back({a, b, c, d});
  std::vector<std::pair<int, int>> planes = {{-1, -1}};
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) planes.emplace_back(i, j);
  for (const auto& mo : monos) {
    int deg = mo[0] + mo[1] + mo[2] + mo[3];
    double supb = std::pow(B, deg);
    double lipb = deg > 0 ? deg * std::pow(B, deg - 1) : 0.0;
    double norm = 2.0 * std::max({supb, lipb, 1e-12});
    for (auto [i, j] : planes) {
      GrassProbe p;
      p.expo = mo;
      p.pi = i;
      p.pj = j;
      p.inv_norm = 1.0 / norm;
      probes.push_back(p);
    }
  }
  return probes;
}

inline Eigen::VectorXd probe_integrals(const DiscreteVarifold& V,
                                       const std::vector<GrassProbe>& probes) {
  Eigen::VectorXd I = Eigen::VectorXd::Zero((Eigen::Index)probes.size());
  for (const Atom& a : V.atoms) {
    Mat P = atom_projector(a, V.dim);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const GrassProbe& pr = probes[p];
      double mono = 1.0;
      for (int k = 0; k < 4; ++k)
        for (int r = 0; r < pr.expo[k]; ++r) mono *= a.x[k];
      double q = pr.pi < 0 ? 1.0 : P(pr.pi, pr.pj);
      I[(Eigen::Index)p] += a.w * mono * q * pr.inv_norm;
    }
  }
  return I;
}

}  // namespace detail

// Sup over a fixed dictionary of normalized Grassmannian test functions
// (coordinate monomials up to degree 3 times projector entries) of
// |int phi dV - int phi dW|.  A pseudometric on bounded-mass varifolds.
inline double varifold_distance(const DiscreteVarifold& V, const DiscreteVarifold& W,
                                double mass_bound = 0.0) {
  if (mass_bound > 0.0 && (V.mass() > mass_bound || W.mass() > mass_bound))
    throw DomainError("varifold_distance: mass bound exceeded");
  double B = std::max(V.domain.coord_bound(), W.domain.coord_bound());
  auto probes = detail::probe_dictionary(B);
  Eigen::VectorXd d = detail::probe_integrals(V, probes) - detail::probe_integrals(W, probes);
  return d.cwiseAbs().maxCoeff();
}

// ---- monotonicity, dilations, tangent verdicts -------------------------------------

inline double density_normalizer(int dim, double rho) {
  return dim == 1 ? 2.0 * rho : kPi * rho * rho;
}

// ||V||(B_rho(x)) / (omega_d rho^d) over an increasing radius grid.
inline std::vector<double> monotonicity_ratio(const DiscreteVarifold& V, const Vec& x,
                                              const std::vector<double>& radii) {
  std::vector<double> dists(V.atoms.size());
  for (std::size_t i = 0; i < V.atoms.size(); ++i)
    dists[i] = V.domain.distance(x, V.atoms[i].x);
  std::vector<double> out;
  out.reserve(radii.size());
  for (double rho : radii) {
    double m = 0.0;
    for (std::size_t i = 0; i < V.atoms.size(); ++i)
      if (dists[i] < rho) m += V.atoms[i].w;
    out.push_back(m / density_normalizer(V.dim, rho));
  }
  return out;
}

// Pushforward of V restricted to B_rho(x) under z -> exp_x^{-1}(z)/rho,
// landing in the Euclidean unit ball; weights scale exactly by rho^-dim.
inline DiscreteVarifold dilate(const DiscreteVarifold& V, const Vec& x, double rho) {
  if (rho <= 0.0) throw RangeError("dilate: rho must be positive");
  const bool euclid = V.domain.type == Domain::Type::Euclidean;
  int k = euclid ? V.domain.edim : V.domain.manifold->dim();
  if (!euclid) {
    if (rho >= V.domain.manifold->inj_radius_bound())
      throw RangeError("dilate: rho exceeds the injectivity radius bound");
    V.domain.manifold->require_on_manifold(x);
  }

  std::vector<Vec> basis;
  if (!euclid) basis = V.domain.manifold->tangent_basis(x);
  auto coords = [&](const Vec& z) -> Vec {
    Vec c = Vec::Zero();
    if (euclid) {
      for (int i = 0; i < k; ++i) c[i] = (z[i] - x[i]) / rho;
    } else {
      Vec u = V.domain.manifold->log_map(x, V.domain.manifold->project(z));
      for (int i = 0; i < k; ++i) c[i] = u.dot(basis[i]) / rho;
    }
    return c;
  };

  DiscreteVarifold W;
  W.dim = V.dim;
  W.domain = Domain::euclidean(k, 1.0);
  double wscale = V.dim == 1 ? 1.0 / rho : 1.0 / (rho * rho);
  const double h = 1e-5;
  for (const Atom& a : V.atoms) {
    if (V.domain.distance(x, a.x) >= rho) continue;
    Atom b;
    b.x = coords(a.x);
    auto push_dir = [&](const Vec& t) -> Vec {
      return (coords(a.x + h * t) - coords(a.x - h * t)) / (2.0 * h);
    };
    b.t1 = normalized_or_zero(push_dir(a.t1));
    if (V.dim == 2) {
      Vec v = push_dir(a.t2);
      v -= v.dot(b.t1) * b.t1;
      b.t2 = normalized_or_zero(v);
    }
    b.w = a.w * wscale;
    canonicalize(b, V.dim);
    W.atoms.push_back(b);
  }
  return W;
}

enum class PlaneVerdict { Planar, NonPlanar, Inconclusive };

struct TangentVerdict {
  PlaneVerdict verdict = PlaneVerdict::Inconclusive;
  int multiplicity = 0;
  double residual = 0.0;       // worst per-scale fit residual
  double multiplicity_raw = 0.0;
};

// Fits one plane through the origin to each dilation and classifies:
// planar when every scale fits with residual < 0.05 and the density is
// within 0.1 of an integer.
inline TangentVerdict tangent_plane_verdict(const DiscreteVarifold& V, const Vec& x,
                                            const std::vector<double>& rhos) {
  if (rhos.size() < 3) throw DomainError("tangent_plane_verdict: need at least 3 scales");
  std::vector<double> residuals, mults;
  for (double rho : rhos) {
    DiscreteVarifold W = dilate(V, x, rho);
    double mass = W.mass();
    mults.push_back(mass / density_normalizer(V.dim, 1.0));
    if (W.atoms.empty()) {
      residuals.push_back(0.0);
      continue;
    }
    Mat M = Mat::Zero();
    for (const Atom& a : W.atoms) M += (a.w / mass) * atom_projector(a, V.dim);
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    Mat Q = Mat::Zero();
    double captured = 0.0;
    for (int r = 0; r < V.dim; ++r) {
      Vec u = es.eigenvectors().col(3 - r);
      Q += u * u.transpose();
      captured += es.eigenvalues()[3 - r];
    }
    double dir_res2 = std::max(0.0, (V.dim - captured) / V.dim);
    double pos_res2 = 0.0;
    for (const Atom& a : W.atoms) pos_res2 += (a.w / mass) * (a.x - Q * a.x).squaredNorm();
    residuals.push_back(std::sqrt(dir_res2 + pos_res2));
  }
  TangentVerdict out;
  out.residual = *std::max_element(residuals.begin(), residuals.end());
  out.multiplicity_raw =
      std::accumulate(mults.begin(), mults.end(), 0.0) / double(mults.size());
  out.multiplicity = (int)std::lround(out.multiplicity_raw);
  bool mult_ok = std::abs(out.multiplicity_raw - out.multiplicity) < 0.1;
  for (double mk : mults) mult_ok = mult_ok && std::abs(mk - out.multiplicity) < 0.1;
  if (out.residual < 0.05 && mult_ok) {
    out.verdict = PlaneVerdict::Planar;
  } else if (residuals[residuals.size() - 1] >= 0.05 && residuals[residuals.size() - 2] >= 0.05) {
    out.verdict = PlaneVerdict::NonPlanar;
  } else {
    out.verdict = PlaneVerdict::Inconclusive;
  }
  return out;
}

// ---- diagnostics ---------------------------------------------------------------

// max over interior vertices of (discrete curvature)^2 * d(x, boundary)^2
// inside the metric ball region.  On manifolds the curvature vector is
// projected onto the tangent space (geodesic / intrinsic component).
inline double smoothness_diagnostic(const Slice& s, const Vec& center, double radius,
                                    const Manifold* m = nullptr) {
  auto dist = [&](const Vec& p) {
    return m ? m->geodesic_distance(center, p) : (p - center).norm();
  };
  std::size_t inside_elems = 0;
  auto all_in = [&](std::initializer_list<int> idx) {
    for (int i : idx)
      if (dist(s.verts[i]) >= radius) return false;
    return true;
  };
  if (s.dim == 1) {
    for (const auto& l : s.loops) {
      std::size_t n = l.size();
      for (std::size_t i = 0; i < n; ++i)
        if (all_in({l[i], l[(i + 1) % n]})) ++inside_elems;
    }
  } else {
    for (const auto& t : s.tris)
      if (all_in({t[0], t[1], t[2]})) ++inside_elems;
  }
  if (inside_elems < 10)
    throw DomainError("smoothness_diagnostic: fewer than 10 elements in region");

  double worst = 0.0;
  auto tangential = [&](const Vec& p, const Vec& v) -> Vec {
    return m ? Vec(m->tangent_projector(p) * v) : v;
  };
  if (s.dim == 1) {
    for (const auto& l : s.loops) {
      std::size_t n = l.size();
      for (std::size_t i = 0; i < n; ++i) {
        const Vec& p = s.verts[l[i]];
        double db = radius - dist(p);
        if (db <= 0.0) continue;
        Vec kv = polyline_curvature_vector(s.verts[l[(i + n - 1) % n]], p,
                                           s.verts[l[(i + 1) % n]]);
        double kappa = tangential(p, kv).norm();
        worst = std::max(worst, sq(kappa) * sq(db));
      }
    }
  } else {
    std::vector<Vec> H = mesh_mean_curvature(s);
    for (std::size_t i = 0; i < s.verts.size(); ++i) {
      double db = radius - dist(s.verts[i]);
      if (db <= 0.0) continue;
      double kappa = tangential(s.verts[i], H[i]).norm();
      worst = std::max(worst, sq(kappa) * sq(db));
    }
  }
  return worst;
}

enum class TouchVerdict { Consistent, ViolationCertificate };

struct ConvexTouchResult {
  TouchVerdict verdict = TouchVerdict::Consistent;
  double certificate_delta = 0.0;  // delta V of the constructed test field
};

// Maximum-principle check against a strictly convex ball K: either some
// support lies in B_r(x) \ K (consistent), or the outward-pulling test
// field chi = phi * psi_T has positive first variation (a violation
// certificate for a stationary varifold).
inline ConvexTouchResult convex_touch_check(const DiscreteVarifold& V, const Vec& k_center,
                                            double k_radius, const Vec& x, double r,
                                            const std::vector<TestField>& dict,
                                            double residual_threshold = 1e-3,
                                            double boundary_tol = 1e-6) {
  if (std::abs(V.domain.distance(x, k_center) - k_radius) > boundary_tol)
    throw DomainError("convex_touch_check: x is not on the boundary of K");
  double near_supp = 1e300;
  for (const Atom& a : V.atoms) near_supp = std::min(near_supp, V.domain.distance(x, a.x));
  if (near_supp > std::max(1e-3, 1e-2 * r))
    throw DomainError("convex_touch_check: x is not in the support of V");
  if (dictionary_residual(V, dict) > residual_threshold)
    throw DomainError("convex_touch_check: varifold is not stationary (residual high)");

  for (const Atom& a : V.atoms)
    if (V.domain.distance(x, a.x) < r && V.domain.distance(k_center, a.x) > k_radius + 1e-12)
      return {TouchVerdict::Consistent, 0.0};

  // chi_T = phi * psi_T with psi_T(y) = -(y - z_T)/|y - z_T|, z_T far along
  // the inner normal, phi a radial cutoff equal to 1 on B_{r/4}(x).
  Vec nu = normalized_or_zero(Vec(k_center - x));
  Vec zt = x + (8.0 * r) * nu;
  auto phi = [x, r](const Vec& y) {
    double s = (y - x).norm() / r;
    if (s <= 0.25) return 1.0;
    if (s >= 0.75) return 0.0;
    return 1.0 - smoothstep5((s - 0.25) * 2.0);
  };
  auto dphi = [x, r](const Vec& y) -> Vec {
    Vec d = y - x;
    double n = d.norm();
    double s = n / r;
    if (s <= 0.25 || s >= 0.75 || n < 1e-14) return Vec::Zero();
    double dv = -smoothstep5_deriv((s - 0.25) * 2.0) * 2.0 / r;
    return (dv / n) * d;
  };
  TestField chi;
  chi.id = "touch-certificate";
  chi.eval = [phi, zt](const Vec& y) -> Vec {
    Vec d = y - zt;
    return -phi(y) * d / d.norm();
  };
  chi.jac_fn = [phi, dphi, zt](const Vec& y) -> Mat {
    Vec d = y - zt;
    double n = d.norm();
    Vec psi = -d / n;
    Mat Dpsi = -(Mat::Identity() - (d / n) * (d / n).transpose()) / n;
    return phi(y) * Dpsi + psi * dphi(y).transpose();
  };
  return {TouchVerdict::ViolationCertificate, first_variation(V, chi)};
}

// Fraction of sampled support points whose atom plane is transversal to the
// distance sphere through them (angle > 1e-3 rad).
inline double transversal_density_check(const DiscreteVarifold& V, const Vec& x, double rho,
                                        int sample_size) {
  std::vector<std::size_t> in;
  for (std::size_t i = 0; i < V.atoms.size(); ++i) {
    double d = V.domain.distance(x, V.atoms[i].x);
    if (d > 1e-12 && d < rho) in.push_back(i);
  }
  if (in.empty()) return 0.0;
  std::size_t stride = std::max<std::size_t>(1, in.size() / std::max(1, sample_size));
  std::size_t used = 0, transversal = 0;
  const double sin_thresh = std::sin(1e-3);
  for (std::size_t k = 0; k < in.size(); k += stride) {
    const Atom& a = V.atoms[in[k]];
    Vec rad = V.domain.distance_gradient(x, a.x);
    double comp = V.dim == 1 ? std::abs(a.t1.dot(rad))
                             : (atom_projector(a, 2) * rad).norm();
    ++used;
    if (comp > sin_thresh) ++transversal;
  }
  return double(transversal) / double(used);
}

// ---- misc -----------------------------------------------------------------------

template <typename Pred>
DiscreteVarifold restrict_atoms(const DiscreteVarifold& V, Pred&& keep) {
  DiscreteVarifold W = V;
  W.atoms.clear();
  for (const Atom& a : V.atoms)
    if (keep(a)) W.atoms.push_back(a);
  return W;
}

inline void write_atom_csv(std::ostream& os, const DiscreteVarifold& V) {
  int d = V.domain.edim;
  os << "x,y,z";
  if (d == 4) os << ",w";
  os << ",dir1x,dir1y,dir1z";
  if (d == 4) os << ",dir1w";
  if (V.dim == 2) {
    os << ",dir2x,dir2y,dir2z";
    if (d == 4) os << ",dir2w";
  }
  os << ",weight\n";
  for (const Atom& a : V.atoms) {
    for (int i = 0; i < d; ++i) os << (i ? "," : "") << a.x[i];
    for (int i = 0; i < d; ++i) os << "," << a.t1[i];
    if (V.dim == 2)
      for (int i = 0; i < d; ++i) os << "," << a.t2[i];
    os << "," << a.w << "\n";
  }
}

}  // namespace mmv
