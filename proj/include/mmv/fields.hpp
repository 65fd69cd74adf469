#pragma once

// Closed-form ambient vector fields with analytic Jacobians: the probe
// dictionary for first-variation residuals and the generators of descent
// isotopies.  Fields are normalized to sup-norm <= 1 on their support.

#include "mmv/manifold.hpp"

#include <functional>
#include <memory>
#include <utility>

namespace mmv {

struct TestField {
  std::string id;
  std::function<Vec(const Vec&)> eval;
  std::function<Mat(const Vec&)> jac_fn;  // empty -> central finite differences
  double fd_step = 1e-5;

  Vec operator()(const Vec& x) const { return eval(x); }

  Mat jacobian(const Vec& x) const {
    if (jac_fn) return jac_fn(x);
    Mat J = Mat::Zero();
    for (int k = 0; k < 4; ++k) {
      Vec xp = x, xm = x;
      xp[k] += fd_step;
      xm[k] -= fd_step;
      J.col(k) = (eval(xp) - eval(xm)) / (2.0 * fd_step);
    }
    return J;
  }

  bool has_analytic_jacobian() const { return static_cast<bool>(jac_fn); }
};

inline TestField constant_field(const std::string& id, const Vec& u) {
  return {id, [u](const Vec&) { return u; }, [](const Vec&) { return Mat::Zero(); }};
}

inline TestField linear_field(const std::string& id, const Mat& A) {
  return {id, [A](const Vec& x) -> Vec { return A * x; }, [A](const Vec&) { return A; }};
}

// chi(x) = bump(|x-c|/R) * u  for a constant direction u.
inline TestField bump_dir_field(const std::string& id, const Vec& c, double R, const Vec& u) {
  auto eval = [c, R, u](const Vec& x) -> Vec { return bump1((x - c).norm() / R) * u; };
  auto jac = [c, R, u](const Vec& x) -> Mat {
    Vec d = x - c;
    double n = d.norm();
    if (n < 1e-14 || n >= R) return Mat::Zero();
    double db = bump1_deriv(n / R) / R;
    return u * (db / n) * d.transpose();
  };
  return {id, eval, jac};
}

// chi(x) = bump(|x-c|/R) * (x - c): a compactly supported radial field.
inline TestField bump_radial_field(const std::string& id, const Vec& c, double R) {
  auto eval = [c, R](const Vec& x) -> Vec {
    Vec d = x - c;
    return bump1(d.norm() / R) * d;
  };
  auto jac = [c, R](const Vec& x) -> Mat {
    Vec d = x - c;
    double n = d.norm();
    Mat I = Mat::Identity();
    if (n >= R) return Mat::Zero();
    if (n < 1e-14) return I;  // bump'(0) = 0
    double b = bump1(n / R), db = bump1_deriv(n / R) / R;
    return b * I + (db / n) * d * d.transpose();
  };
  return {id, eval, jac};
}

inline TestField scale_field(TestField f, double s) {
  TestField out;
  out.id = f.id;
  auto base = std::make_shared<TestField>(std::move(f));
  out.eval = [base, s](const Vec& x) { return Vec(s * base->eval(x)); };
  if (base->jac_fn)
    out.jac_fn = [base, s](const Vec& x) { return Mat(s * base->jac_fn(x)); };
  return out;
}

// Multiplies by a C^2 bump supported in the open ball B_R(c); the result
// is compactly supported there.
inline TestField bump_cut(TestField f, const Vec& c, double R) {
  TestField out;
  out.id = f.id + "|cut";
  auto base = std::make_shared<TestField>(std::move(f));
  out.eval = [base, c, R](const Vec& x) -> Vec {
    double b = bump1((x - c).norm() / R);
    return b == 0.0 ? Vec(Vec::Zero()) : Vec(b * base->eval(x));
  };
  if (base->jac_fn) {
    out.jac_fn = [base, c, R](const Vec& x) -> Mat {
      Vec d = x - c;
      double n = d.norm();
      if (n >= R) return Mat::Zero();
      double b = bump1(n / R);
      Mat J = b * base->jac_fn(x);
      if (n > 1e-14) {
        double db = bump1_deriv(n / R) / R;
        J += base->eval(x) * (db / n) * d.transpose();
      }
      return J;
    };
  }
  return out;
}

// Pointwise projection onto the tangent spaces of m.  The Jacobian uses the
// analytic derivative of the ambient projector formula, so it is exact for
// the smooth ambient extension of the projected field.
inline TestField tangent_project(TestField f, const Manifold& m) {
  TestField out;
  out.id = f.id + "|tan";
  auto base = std::make_shared<TestField>(std::move(f));
  auto mf = std::make_shared<Manifold>(m);
  out.eval = [base, mf](const Vec& x) -> Vec { return mf->tangent_projector(x) * base->eval(x); };
  if (base->jac_fn) {
    out.jac_fn = [base, mf](const Vec& x) -> Mat {
      Mat P = mf->tangent_projector(x);
      Mat J = P * base->jac_fn(x);
      auto dP = mf->tangent_projector_jacobian(x);
      Vec chi = base->eval(x);
      for (int k = 0; k < 4; ++k) J.col(k) += dP[k] * chi;
      return J;
    };
  }
  return out;
}

}  // namespace mmv
