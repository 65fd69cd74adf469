#pragma once

// Ambient Riemannian spaces: parametric surfaces and 3-manifolds embedded
// in R^3 / R^4 with analytic projections, tangent bases, exponential and
// logarithm maps, geodesic distance, and Monte-Carlo sub-level volumes.
//
// Supported kinds: round 2-/3-spheres, triaxial 2-ellipsoids, flat 2-tori
// (arclength Clifford embedding in R^4) and flat 3-tori (periodic cube).

#include "mmv/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <functional>
#include <optional>

namespace mmv {

enum class ManifoldKind {
  RoundSphere2,
  Ellipsoid2,
  FlatTorus2,
  RoundSphere3,
  FlatTorus3,
};

inline std::string to_string(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::RoundSphere2: return "round-sphere-2";
    case ManifoldKind::Ellipsoid2: return "ellipsoid-2";
    case ManifoldKind::FlatTorus2: return "flat-torus-2";
    case ManifoldKind::RoundSphere3: return "round-sphere-3";
    case ManifoldKind::FlatTorus3: return "flat-torus-3";
  }
  throw DomainError("unknown manifold kind");
}

inline ManifoldKind manifold_kind_from_string(const std::string& s) {
  if (s == "round-sphere-2") return ManifoldKind::RoundSphere2;
  if (s == "ellipsoid-2") return ManifoldKind::Ellipsoid2;
  if (s == "flat-torus-2") return ManifoldKind::FlatTorus2;
  if (s == "round-sphere-3") return ManifoldKind::RoundSphere3;
  if (s == "flat-torus-3") return ManifoldKind::FlatTorus3;
  throw DomainError("unknown manifold kind: " + s);
}

struct VolumeEstimate {
  double value = 0.0;
  double stderr_est = 0.0;  // one-sigma Monte-Carlo error
  bool accuracy_ok = true;  // false when the sample budget cannot reach the request
};

class Manifold {
 public:
  Manifold(ManifoldKind kind, std::vector<double> params)
      : kind_(kind), params_(std::move(params)) {
    validate();
  }

  static Manifold round_sphere2(double r = 1.0) { return {ManifoldKind::RoundSphere2, {r}}; }
  static Manifold ellipsoid2(double a, double b, double c) {
    return {ManifoldKind::Ellipsoid2, {a, b, c}};
  }
  static Manifold flat_torus2(double side = 1.0) { return {ManifoldKind::FlatTorus2, {side}}; }
  static Manifold round_sphere3(double r = 1.0) { return {ManifoldKind::RoundSphere3, {r}}; }
  static Manifold flat_torus3(double side = 1.0) { return {ManifoldKind::FlatTorus3, {side}}; }

  static Manifold from_json(const nlohmann::json& j) {
    return {manifold_kind_from_string(j.at("kind").get<std::string>()),
            j.at("params").get<std::vector<double>>()};
  }
  nlohmann::json to_json() const {
    return nlohmann::json{{"kind", to_string(kind_)}, {"params", params_}};
  }

  ManifoldKind kind() const { return kind_; }
  const std::vector<double>& params() const { return params_; }

  int embed_dim() const {
    switch (kind_) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::Ellipsoid2:
      case ManifoldKind::FlatTorus3: return 3;
      case ManifoldKind::FlatTorus2:
      case ManifoldKind::RoundSphere3: return 4;
    }
    return 3;
  }

  int dim() const {
    switch (kind_) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::Ellipsoid2:
      case ManifoldKind::FlatTorus2: return 2;
      case ManifoldKind::RoundSphere3:
      case ManifoldKind::FlatTorus3: return 3;
    }
    return 2;
  }

  // Analytic lower bound for the injectivity radius.
  double inj_radius_bound() const {
    switch (kind_) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::RoundSphere3: return kPi * params_[0];
      case ManifoldKind::Ellipsoid2: {
        double a = params_[0], b = params_[1], c = params_[2];
        double amax = std::max({a, b, c}), amin = std::min({a, b, c});
        // Klingenberg: inj >= min(pi / sqrt(K_max), half shortest closed
        // geodesic); K_max = amax^4 / (abc)^2 and the shortest principal
        // section has circumference >= 2 pi amin.
        return std::min(kPi * a * b * c / (amax * amax), kPi * amin);
      }
      case ManifoldKind::FlatTorus2:
      case ManifoldKind::FlatTorus3: return 0.5 * params_[0];
    }
    return 0.0;
  }

  // Upper bound on the geodesic diameter, used only as a length scale.
  double diameter_bound() const {
    switch (kind_) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::RoundSphere3: return kPi * params_[0];
      case ManifoldKind::Ellipsoid2:
        return kPi * std::max({params_[0], params_[1], params_[2]});
      case ManifoldKind::FlatTorus2: return params_[0] * std::sqrt(2.0) / 2.0 * 2.0;
      case ManifoldKind::FlatTorus3: return params_[0] * std::sqrt(3.0) / 2.0 * 2.0;
    }
    return 1.0;
  }

  // Total Riemannian volume (area for surfaces).
  double total_volume() const {
    switch (kind_) {
      case ManifoldKind::RoundSphere2: return 4.0 * kPi * sq(params_[0]);
      case ManifoldKind::Ellipsoid2: return ellipsoid_area();
      case ManifoldKind::FlatTorus2: return sq(params_[0]);
      case ManifoldKind::RoundSphere3: return 2.0 * sq(kPi) * params_[0] * sq(params_[0]);
      case ManifoldKind::FlatTorus3: return params_[0] * sq(params_[0]);
    }
    return 0.0;
  }

  // ---- point ops ------------------------------------------------------

  Vec project(const Vec& p) const {
    switch (kind_) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::RoundSphere3: {
        double n = p.norm();
        if (n < 1e-300) throw DomainError("cannot project the origin onto a sphere");
        return p * (params_[0] / n);
      }
      case ManifoldKind::Ellipsoid2: {
        double s = std::sqrt(sq(p[0] / params_[0]) + sq(p[1] / params_[1]) + sq(p[2] / params_[2]));
        if (s < 1e-300) throw DomainError("cannot project the origin onto an ellipsoid");
        return p / s;
      }
      case ManifoldKind::FlatTorus2: {
        double R = clifford_radius();
        Vec q = Vec::Zero();
        double n1 = std::hypot(p[0], p[1]), n2 = std::hypot(p[2], p[3]);
        if (n1 < 1e-300 || n2 < 1e-300) throw DomainError("degenerate flat-torus projection");
        q[0] = p[0] * R / n1;
        q[1] = p[1] * R / n1;
        q[2] = p[2] * R / n2;
        q[3] = p[3] * R / n2;
        return q;
      }
      case ManifoldKind::FlatTorus3: {
        double L = params_[0];
        Vec q = Vec::Zero();
        for (int i = 0; i < 3; ++i) {
          double w = std::fmod(p[i], L);
          if (w < 0.0) w += L;
          q[i] = w;
        }
        return q;
      }
    }
    return p;
  }

  bool on_manifold(const Vec& p, double tol = 1e-8) const {
    return (project(p) - p).norm() <= tol;
  }

  void require_on_manifold(const Vec& p, double tol = 1e-6) const {
    if (!on_manifold(p, tol)) throw DomainError("point is off the manifold beyond tolerance");
  }

  // Orthonormal tangent basis at x (dim() vectors).
  std::vector<Vec> tangent_basis(const Vec& x) const {
    std::vector<Vec> nrm = normal_basis(x);
    // Complete the normal frame to an orthonormal frame of the embedding
    // space; the leftover vectors span the tangent space.
    std::vector<Vec> frame = nrm;
    int d = embed_dim();
    for (int i = 0; i < d && (int)frame.size() < d; ++i) {
      Vec e = Vec::Zero();
      e[i] = 1.0;
      for (const Vec& f : frame) e -= f.dot(e) * f;
      if (e.norm() > 1e-6) frame.push_back(e.normalized());
    }
    return {frame.begin() + nrm.size(), frame.end()};
  }

  // Orthonormal basis of the normal space at x (analytic per kind).
  std::vector<Vec> normal_basis(const Vec& x) const {
    switch (kind_) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::RoundSphere3: return {x.normalized()};
      case ManifoldKind::Ellipsoid2: {
        Vec g = vec3(x[0] / sq(params_[0]), x[1] / sq(params_[1]), x[2] / sq(params_[2]));
        return {g.normalized()};
      }
      case ManifoldKind::FlatTorus2: {
        Vec n1 = Vec::Zero(), n2 = Vec::Zero();
        double a = std::hypot(x[0], x[1]), b = std::hypot(x[2], x[3]);
        n1[0] = x[0] / a;
        n1[1] = x[1] / a;
        n2[2] = x[2] / b;
        n2[3] = x[3] / b;
        return {n1, n2};
      }
      case ManifoldKind::FlatTorus3: return {};
    }
    return {};
  }

  // Orthogonal projector onto the tangent space at x.
  Mat tangent_projector(const Vec& x) const {
    Mat P = Mat::Zero();
    int d = embed_dim();
    for (int i = 0; i < d; ++i) P(i, i) = 1.0;
    for (const Vec& n : normal_basis(x)) P -= n * n.transpose();
    return P;
  }

  // Derivative of the tangent projector: dP[k] = dP/dx_k restricted to
  // on-manifold motion.  Analytic for every kind (zero for flat tori).
  std::array<Mat, 4> tangent_projector_jacobian(const Vec& x) const {
    std::array<Mat, 4> dP;
    dP.fill(Mat::Zero());
    switch (kind_) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::RoundSphere3: {
        double r2 = sq(params_[0]);
        for (int k = 0; k < embed_dim(); ++k) {
          Vec ek = Vec::Zero();
          ek[k] = 1.0;
          dP[k] = -(ek * x.transpose() + x * ek.transpose()) / r2;
        }
        return dP;
      }
      case ManifoldKind::FlatTorus2: {
        double R2 = sq(clifford_radius());
        for (int k = 0; k < 4; ++k) {
          Vec ek = Vec::Zero(), xp = Vec::Zero();
          ek[k] = 1.0;
          if (k < 2) {
            xp[0] = x[0];
            xp[1] = x[1];
          } else {
            xp[2] = x[2];
            xp[3] = x[3];
          }
          dP[k] = -(ek * xp.transpose() + xp * ek.transpose()) / R2;
        }
        return dP;
      }
      case ManifoldKind::Ellipsoid2: {
        Vec g = vec3(x[0] / sq(params_[0]), x[1] / sq(params_[1]), x[2] / sq(params_[2]));
        double gn = g.norm();
        Vec n = g / gn;
        Mat Dg = Mat::Zero();
        for (int i = 0; i < 3; ++i) Dg(i, i) = 1.0 / sq(params_[i]);
        Mat I3 = Mat::Zero();
        for (int i = 0; i < 3; ++i) I3(i, i) = 1.0;
        Mat Dn = (I3 - n * n.transpose()) * Dg / gn;
        for (int k = 0; k < 3; ++k) {
          Vec dnk = Dn.col(k);
          dP[k] = -(dnk * n.transpose() + n * dnk.transpose());
        }
        return dP;
      }
      case ManifoldKind::FlatTorus3: return dP;
    }
    return dP;
  }

  // ---- exponential map, logarithm, distance ---------------------------

  Vec exp_map(const Vec& x, const Vec& v) const {
    double nv = v.norm();
    if (nv >= inj_radius_bound())
      throw RangeError("exp: |v| exceeds the injectivity radius bound");
    if (nv == 0.0) return x;
    switch (kind_) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::RoundSphere3: {
        double r = params_[0], th = nv / r;
        return std::cos(th) * x + std::sin(th) * (r / nv) * v;
      }
      case ManifoldKind::FlatTorus2: {
        auto [u, w] = torus2_chart(x);
        auto bas = torus2_chart_basis(x);
        double du = v.dot(bas[0]), dw = v.dot(bas[1]);
        return torus2_embed(u + du, w + dw);
      }
      case ManifoldKind::FlatTorus3: return project(x + v);
      case ManifoldKind::Ellipsoid2: {
        auto [p, dir] = shoot_geodesic(x, v / nv, nv);
        (void)dir;
        return p;
      }
    }
    return x;
  }

  Vec log_map(const Vec& x, const Vec& q) const {
    switch (kind_) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::RoundSphere3: {
        double r = params_[0];
        double c = x.dot(q) / sq(r);
        Vec w = q - c * x;
        double wn = w.norm();
        double dist = r * std::atan2(wn / r, c);
        if (wn < 1e-14) {
          if (c > 0.0) return Vec::Zero();
          throw RangeError("log: antipodal point is on the cut locus");
        }
        return (dist / wn) * w;
      }
      case ManifoldKind::FlatTorus2: {
        double L = params_[0];
        auto [u1, w1] = torus2_chart(x);
        auto [u2, w2] = torus2_chart(q);
        double du = wrap_half(u2 - u1, L), dw = wrap_half(w2 - w1, L);
        auto bas = torus2_chart_basis(x);
        return du * bas[0] + dw * bas[1];
      }
      case ManifoldKind::FlatTorus3: {
        double L = params_[0];
        Vec v = Vec::Zero();
        for (int i = 0; i < 3; ++i) v[i] = wrap_half(q[i] - x[i], L);
        return v;
      }
      case ManifoldKind::Ellipsoid2: return ellipsoid_log(x, q);
    }
    return Vec::Zero();
  }

  double geodesic_distance(const Vec& p, const Vec& q) const {
    require_on_manifold(p);
    require_on_manifold(q);
    switch (kind_) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::RoundSphere3: {
        double r = params_[0];
        double c = clamp(p.dot(q) / sq(r), -1.0, 1.0);
        Vec w = q - (p.dot(q) / sq(r)) * p;
        return r * std::atan2(w.norm() / r, c);
      }
      case ManifoldKind::FlatTorus2:
      case ManifoldKind::FlatTorus3: return log_map(p, q).norm();
      case ManifoldKind::Ellipsoid2: {
        if ((p - q).norm() < 1e-14) return 0.0;
        return ellipsoid_log(p, q).norm();
      }
    }
    return 0.0;
  }

  // ---- geodesic shooting (used for ellipsoids; exact elsewhere) --------

  // Integrates the embedded geodesic ODE x'' = lambda * grad F from x with
  // unit initial direction for arclength `len`.  Adaptive RK4 with
  // step-doubling, local tolerance 1e-9, projection after each step.
  std::pair<Vec, Vec> shoot_geodesic(const Vec& x0, const Vec& dir, double len,
                                     double tol = 1e-9) const {
    Vec x = project(x0);
    Vec v = tangent_projector(x) * dir;
    if (v.norm() < 1e-300) throw DomainError("degenerate shooting direction");
    v.normalize();
    double s = 0.0;
    double h = std::max(1e-4, len / 64.0);
    while (s < len) {
      h = std::min(h, len - s);
      Vec x1, v1, xa, va, xb, vb;
      rk4_step(x, v, h, x1, v1);
      rk4_step(x, v, 0.5 * h, xa, va);
      rk4_step(xa, va, 0.5 * h, xb, vb);
      double err = (x1 - xb).norm() + (v1 - vb).norm();
      if (err > tol && h > 1e-7) {
        h *= 0.5;
        continue;
      }
      x = project(xb);
      v = tangent_projector(x) * vb;
      v.normalize();
      s += h;
      if (err < tol / 16.0) h *= 2.0;
    }
    return {x, v};
  }

  // ---- Morse functions --------------------------------------------------

  std::vector<std::string> morse_function_names() const {
    switch (kind_) {
      case ManifoldKind::RoundSphere2:
      case ManifoldKind::Ellipsoid2: return {"z"};
      case ManifoldKind::RoundSphere3: return {"x4"};
      case ManifoldKind::FlatTorus2:
      case ManifoldKind::FlatTorus3: return {"height"};
    }
    return {};
  }

  double morse_value(const std::string& name, const Vec& p) const {
    if (name == "z" && embed_dim() == 3) return p[2];
    if (name == "x4" && embed_dim() == 4 && kind_ == ManifoldKind::RoundSphere3) return p[3];
    if (name == "height" && kind_ == ManifoldKind::FlatTorus2) {
      auto [u, v] = torus2_chart(p);
      double L = params_[0];
      return (3.0 - std::cos(2.0 * kPi * u / L) - 2.0 * std::cos(2.0 * kPi * v / L)) / 6.0;
    }
    if (name == "height" && kind_ == ManifoldKind::FlatTorus3) {
      double L = params_[0];
      return (7.0 - std::cos(2.0 * kPi * p[0] / L) - 2.0 * std::cos(2.0 * kPi * p[1] / L) -
              4.0 * std::cos(2.0 * kPi * p[2] / L)) /
             14.0;
    }
    throw DomainError("unknown Morse function '" + name + "' for this manifold kind");
  }

  std::pair<double, double> morse_range(const std::string& name) const {
    if (name == "z") return {-params_[kind_ == ManifoldKind::Ellipsoid2 ? 2 : 0],
                             params_[kind_ == ManifoldKind::Ellipsoid2 ? 2 : 0]};
    if (name == "x4") return {-params_[0], params_[0]};
    if (name == "height") return {0.0, 1.0};
    throw DomainError("unknown Morse function: " + name);
  }

  // Critical values and one critical point per value.
  std::vector<std::pair<double, Vec>> morse_critical_data(const std::string& name) const {
    switch (kind_) {
      case ManifoldKind::RoundSphere2: {
        double r = params_[0];
        return {{-r, vec3(0, 0, -r)}, {r, vec3(0, 0, r)}};
      }
      case ManifoldKind::Ellipsoid2: {
        double c = params_[2];
        return {{-c, vec3(0, 0, -c)}, {c, vec3(0, 0, c)}};
      }
      case ManifoldKind::RoundSphere3: {
        double r = params_[0];
        return {{-r, Vec(0, 0, 0, -r)}, {r, Vec(0, 0, 0, r)}};
      }
      case ManifoldKind::FlatTorus2: {
        double L = params_[0];
        return {{0.0, torus2_embed(0, 0)},
                {1.0 / 3.0, torus2_embed(L / 2, 0)},
                {2.0 / 3.0, torus2_embed(0, L / 2)},
                {1.0, torus2_embed(L / 2, L / 2)}};
      }
      case ManifoldKind::FlatTorus3: {
        double L = params_[0];
        std::vector<std::pair<double, Vec>> out;
        for (int sx : {0, 1})
          for (int sy : {0, 1})
            for (int sz : {0, 1}) {
              Vec p = vec3(sx * L / 2, sy * L / 2, sz * L / 2);
              out.emplace_back(morse_value(name, p), p);
            }
        std::sort(out.begin(), out.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        return out;
      }
    }
    return {};
  }

  // ---- sampling and volumes ---------------------------------------------

  Vec sample_uniform(Rng& rng) const {
    switch (kind_) {
      case ManifoldKind::RoundSphere2: {
        Vec g = gaussian_vec(rng, 3);
        return project(g);
      }
      case ManifoldKind::RoundSphere3: {
        Vec g = gaussian_vec(rng, 4);
        return project(g);
      }
      case ManifoldKind::FlatTorus2: {
        double L = params_[0];
        return torus2_embed(uniform(rng, 0, L), uniform(rng, 0, L));
      }
      case ManifoldKind::FlatTorus3: {
        double L = params_[0];
        return vec3(uniform(rng, 0, L), uniform(rng, 0, L), uniform(rng, 0, L));
      }
      case ManifoldKind::Ellipsoid2: {
        // Scaled-sphere rejection sampling against the exact area element.
        double a = params_[0], b = params_[1], c = params_[2];
        double wmax = std::max({b * c, a * c, a * b});
        for (int it = 0; it < 10000; ++it) {
          Vec u = gaussian_vec(rng, 3).normalized();
          double w = std::sqrt(sq(u[0] * b * c) + sq(u[1] * a * c) + sq(u[2] * a * b));
          if (uniform(rng, 0, wmax) <= w) return vec3(a * u[0], b * u[1], c * u[2]);
        }
        throw NumericError("ellipsoid rejection sampling failed");
      }
    }
    throw DomainError("unsupported kind");
  }

  // Monte-Carlo volume of { f < threshold } for a named Morse function.
  VolumeEstimate sublevel_volume(const std::string& morse_name, double threshold,
                                 int n_samples, double requested_err = 0.0,
                                 std::uint64_t seed = 20240915) const {
    if (n_samples < 16) throw DomainError("sublevel_volume: resolution too small");
    Rng rng(seed);
    double tot = total_volume();
    long hits = 0;
    for (int i = 0; i < n_samples; ++i)
      if (morse_value(morse_name, sample_uniform(rng)) < threshold) ++hits;
    double p = double(hits) / n_samples;
    VolumeEstimate est;
    est.value = tot * p;
    est.stderr_est = tot * std::sqrt(std::max(p * (1.0 - p), 1.0 / n_samples) / n_samples);
    est.accuracy_ok = (requested_err <= 0.0) || (est.stderr_est <= requested_err);
    return est;
  }

  // ---- flat-torus-2 chart helpers ----------------------------------------

  double clifford_radius() const { return params_[0] / (2.0 * kPi); }

  Vec torus2_embed(double u, double v) const {
    double R = clifford_radius();
    return Vec(R * std::cos(u / R), R * std::sin(u / R), R * std::cos(v / R),
               R * std::sin(v / R));
  }

  std::pair<double, double> torus2_chart(const Vec& p) const {
    double R = clifford_radius(), L = params_[0];
    double u = R * std::atan2(p[1], p[0]);
    double v = R * std::atan2(p[3], p[2]);
    if (u < 0) u += L;
    if (v < 0) v += L;
    return {u, v};
  }

  std::array<Vec, 2> torus2_chart_basis(const Vec& p) const {
    double R = clifford_radius();
    double cu = p[0] / R, su = p[1] / R, cv = p[2] / R, sv = p[3] / R;
    return {Vec(-su, cu, 0, 0), Vec(0, 0, -sv, cv)};
  }

 private:
  static double clamp(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
  }

  static double wrap_half(double d, double L) {
    d = std::fmod(d, L);
    if (d > 0.5 * L) d -= L;
    if (d < -0.5 * L) d += L;
    return d;
  }

  void validate() const {
    std::size_t need = kind_ == ManifoldKind::Ellipsoid2 ? 3 : 1;
    if (params_.size() != need) throw DomainError("wrong parameter count for manifold kind");
    for (double p : params_)
      if (!(p > 0.0)) throw DomainError("manifold shape parameters must be positive");
  }

  // Geodesic acceleration on the ellipsoid: x'' = lambda grad F with
  // lambda = -(v' H v) / |grad F|^2 for F = sum x_i^2/a_i^2 - 1.
  Vec geodesic_accel(const Vec& x, const Vec& v) const {
    Vec g = vec3(x[0] / sq(params_[0]), x[1] / sq(params_[1]), x[2] / sq(params_[2]));
    double vhv = sq(v[0]) / sq(params_[0]) + sq(v[1]) / sq(params_[1]) + sq(v[2]) / sq(params_[2]);
    double lam = -vhv / g.squaredNorm();
    return lam * g;
  }

  void rk4_step(const Vec& x, const Vec& v, double h, Vec& xo, Vec& vo) const {
    Vec k1x = v, k1v = geodesic_accel(x, v);
    Vec k2x = v + 0.5 * h * k1v, k2v = geodesic_accel(x + 0.5 * h * k1x, k2x);
    Vec k3x = v + 0.5 * h * k2v, k3v = geodesic_accel(x + 0.5 * h * k2x, k3x);
    Vec k4x = v + h * k3v, k4v = geodesic_accel(x + h * k3x, k4x);
    xo = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    vo = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }

  // Logarithm on the ellipsoid by trust-region Gauss-Newton shooting in
  // tangent coordinates, multistarted so that far-apart points converge to
  // the minimal geodesic rather than a wrapped one.
  Vec ellipsoid_log(const Vec& x, const Vec& q) const {
    auto bas = tangent_basis(x);
    Vec chord = q - x;
    double chord_len = chord.norm();
    if (chord_len < 1e-15) return Vec::Zero();
    Vec pc = tangent_projector(x) * chord;
    if (pc.norm() < 1e-14) throw RangeError("ellipsoid log: point near the cut locus");
    double base_angle = std::atan2(pc.dot(bas[1]), pc.dot(bas[0]));
    // angular estimate from the scaled-sphere pullback
    Vec u1 = vec3(x[0] / params_[0], x[1] / params_[1], x[2] / params_[2]).normalized();
    Vec u2 = vec3(q[0] / params_[0], q[1] / params_[1], q[2] / params_[2]).normalized();
    double theta = std::acos(std::clamp(u1.dot(u2), -1.0, 1.0));
    double r_eff = (params_[0] + params_[1] + params_[2]) / 3.0;
    double wmax = 1.3 * kPi * std::max({params_[0], params_[1], params_[2]});

    auto shoot = [&](const Eigen::Vector2d& ww) -> Vec {
      Vec v = ww[0] * bas[0] + ww[1] * bas[1];
      double len = v.norm();
      if (len < 1e-15) return x;
      return shoot_geodesic(x, v / len, len).first;
    };
    auto solve_from = [&](Eigen::Vector2d w, Eigen::Vector2d& out) -> double {
      for (int it = 0; it < 60; ++it) {
        Vec r = shoot(w) - q;
        if (r.norm() < 1e-11) {
          out = w;
          return r.norm();
        }
        double h = std::max(1e-7, 1e-7 * w.norm());
        Eigen::Matrix<double, 4, 2> J;
        for (int k = 0; k < 2; ++k) {
          Eigen::Vector2d wp = w, wm = w;
          wp[k] += h;
          wm[k] -= h;
          J.col(k) = (shoot(wp) - shoot(wm)) / (2.0 * h);
        }
        Eigen::Matrix2d JtJ = J.transpose() * J;
        Eigen::Vector2d step = JtJ.ldlt().solve(J.transpose() * r);
        double cap = 0.25 + 0.1 * w.norm();
        if (step.norm() > cap) step *= cap / step.norm();
        w -= step;
        if (w.norm() > wmax) w *= wmax / w.norm();
        if (step.norm() < 1e-13) break;
      }
      Vec r = shoot(w) - q;
      out = w;
      return r.norm();
    };

    Eigen::Vector2d best = Eigen::Vector2d::Zero();
    double best_len = 1e300;
    bool found = false;
    for (double dth : {0.0, 0.3, -0.3, 0.8, -0.8}) {
      for (double len0 : {chord_len, theta * r_eff}) {
        if (len0 < 1e-15) continue;
        double ang = base_angle + dth;
        Eigen::Vector2d w0(len0 * std::cos(ang), len0 * std::sin(ang));
        Eigen::Vector2d w;
        if (solve_from(w0, w) < 1e-9 && w.norm() < best_len) {
          best = w;
          best_len = w.norm();
          found = true;
        }
      }
      if (found && dth == 0.0) break;  // the straightforward start converged
    }
    if (!found) throw NumericError("ellipsoid log: shooting failed to converge");
    return best[0] * bas[0] + best[1] * bas[1];
  }

  // Ellipsoid surface area by product Gauss quadrature over the scaled
  // sphere parametrization.
  double ellipsoid_area() const {
    double a = params_[0], b = params_[1], c = params_[2];
    const int nth = 256, nph = 256;
    double sum = 0.0;
    for (int i = 0; i < nth; ++i) {
      double th = kPi * (i + 0.5) / nth;
      for (int j = 0; j < nph; ++j) {
        double ph = 2.0 * kPi * (j + 0.5) / nph;
        double ux = std::sin(th) * std::cos(ph), uy = std::sin(th) * std::sin(ph),
               uz = std::cos(th);
        double w = std::sqrt(sq(ux * b * c) + sq(uy * a * c) + sq(uz * a * b));
        sum += w * std::sin(th);
      }
    }
    return sum * (kPi / nth) * (2.0 * kPi / nph);
  }

  ManifoldKind kind_;
  std::vector<double> params_;
};

}  // namespace mmv
