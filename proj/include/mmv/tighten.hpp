#pragma once

// Pull-tight machinery: stationarity residuals from the field dictionary,
// measure-decreasing descent fields (softmax-selected for continuity in V),
// certified tightening flows per slice, and the time-smoothed family loop
// that drives near-maximal slices toward stationarity.

#include "mmv/sweepout.hpp"
#include "mmv/varifold.hpp"

#include <optional>
#include <sstream>

namespace mmv {

// Monotone table with linear interpolation; clamped outside the knots.
struct MonotoneTable {
  std::vector<std::pair<double, double>> knots;  // (gamma, value), gamma increasing

  double operator()(double g) const {
    if (knots.empty()) return 0.0;
    if (g <= knots.front().first) return knots.front().second;
    if (g >= knots.back().first) return knots.back().second;
    for (std::size_t i = 1; i < knots.size(); ++i)
      if (g <= knots[i].first) {
        auto [g0, v0] = knots[i - 1];
        auto [g1, v1] = knots[i];
        return v0 + (v1 - v0) * (g - g0) / (g1 - g0);
      }
    return knots.back().second;
  }

  bool valid() const {
    if (knots.empty() || knots.front().first != 0.0 || knots.front().second != 0.0) return false;
    for (std::size_t i = 1; i < knots.size(); ++i)
      if (knots[i].first <= knots[i - 1].first || knots[i].second < knots[i - 1].second)
        return false;
    return true;
  }
};

// Tabulates f over the dyadic residual bands 2^-k plus zero.
inline MonotoneTable tabulate_bands(const std::function<double(double)>& f, double gmax = 16.0) {
  MonotoneTable t;
  t.knots.emplace_back(0.0, 0.0);
  for (int k = 14; k >= -4; --k) {
    double g = std::ldexp(1.0, -k);  // 2^-k
    if (g > gmax) break;
    t.knots.emplace_back(g, f(g));
  }
  return t;
}

struct TighteningProfile {
  MonotoneTable time_map;      // T: residual -> flow time in [0, 1]
  MonotoneTable decrease_map;  // L: residual -> certified decrease
  double softmax_temperature = 0.1;
  double step_factor = 0.1;  // explicit step <= step_factor * local feature size
  int quad_order = 2;
  int max_rounds = 50;
  double residual_target = 1e-2;
  double near_max_fraction = 0.02;  // slices above (1 - fraction) * F are "near max"

  static TighteningProfile defaults() {
    TighteningProfile p;
    p.time_map = tabulate_bands([](double g) { return std::min(1.0, g); });
    p.decrease_map = tabulate_bands([](double g) { return 0.25 * g * g; });
    return p;
  }
};

// ---- residual dictionary blocks -----------------------------------------------

// Fields organized so that block residuals can be maximized in closed form
// over the unit coefficient ball (making the value isometry-invariant for
// the linear blocks), plus singleton probe fields.
struct FieldBlocks {
  std::vector<std::vector<TestField>> coeff_balls;
  std::vector<TestField> singletons;

  std::vector<TestField> flatten() const {
    std::vector<TestField> out = singletons;
    for (const auto& b : coeff_balls) out.insert(out.end(), b.begin(), b.end());
    return out;
  }
};

inline FieldBlocks residual_blocks(const Domain& dom) {
  FieldBlocks out;
  auto e = [](int i) {
    Vec v = Vec::Zero();
    v[i] = 1.0;
    return v;
  };
  if (dom.type == Domain::Type::Euclidean) {
    int k = dom.edim;
    double R = dom.radius > 0.0 ? dom.radius : 2.0;
    Vec c0 = Vec::Zero();
    std::vector<TestField> consts, bumps;
    for (int i = 0; i < k; ++i) {
      consts.push_back(bump_cut(constant_field("e" + std::to_string(i), e(i)), c0, R));
      bumps.push_back(bump_dir_field("bump-e" + std::to_string(i), c0, 0.5 * R, e(i)));
    }
    out.coeff_balls.push_back(std::move(consts));
    out.coeff_balls.push_back(std::move(bumps));
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        Mat A = Mat::Zero();
        A(i, j) = 1.0;
        out.singletons.push_back(bump_cut(
            scale_field(linear_field("x" + std::to_string(j) + "e" + std::to_string(i), A), 1.0 / R),
            c0, R));
      }
    out.singletons.push_back(bump_cut(scale_field(linear_field("radial", Mat(Mat::Identity())),
                                                  1.0 / R),
                                      c0, R));
    out.singletons.push_back(bump_radial_field("bump-radial", c0, 0.5 * R));
  } else {
    const Manifold& m = *dom.manifold;
    if (m.kind() == ManifoldKind::FlatTorus3) {
      for (const TestField& f : standard_dictionary(dom)) out.singletons.push_back(f);
      return out;
    }
    int k = m.embed_dim();
    double B = dom.coord_bound();
    std::vector<TestField> consts;
    for (int i = 0; i < k; ++i)
      consts.push_back(tangent_project(constant_field("e" + std::to_string(i), e(i)), m));
    out.coeff_balls.push_back(std::move(consts));
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        Mat A = Mat::Zero();
        A(i, j) = 1.0;
        out.singletons.push_back(tangent_project(
            scale_field(linear_field("x" + std::to_string(j) + "e" + std::to_string(i), A), 1.0 / B),
            m));
      }
  }
  return out;
}

// Fixed linear combination of fields; sup-norm <= 1 whenever the members
// have sup <= 1 and the coefficients lie in the unit l1/l2 ball.
inline TestField combine_fields(const std::string& id, std::vector<TestField> fields,
                                std::vector<double> coeffs) {
  auto fs = std::make_shared<std::vector<TestField>>(std::move(fields));
  auto cs = std::make_shared<std::vector<double>>(std::move(coeffs));
  TestField out;
  out.id = id;
  out.eval = [fs, cs](const Vec& x) -> Vec {
    Vec v = Vec::Zero();
    for (std::size_t i = 0; i < fs->size(); ++i)
      if ((*cs)[i] != 0.0) v += (*cs)[i] * (*fs)[i].eval(x);
    return v;
  };
  bool analytic = true;
  for (const TestField& f : *fs) analytic = analytic && f.has_analytic_jacobian();
  if (analytic) {
    out.jac_fn = [fs, cs](const Vec& x) -> Mat {
      Mat J = Mat::Zero();
      for (std::size_t i = 0; i < fs->size(); ++i)
        if ((*cs)[i] != 0.0) J += (*cs)[i] * (*fs)[i].jacobian(x);
      return J;
    };
  }
  return out;
}

struct ResidualReport {
  double value = 0.0;
  std::optional<TestField> best_field;  // delta V(best) = -value
};

// max over the normalized dictionary of (-delta V)^+.  Linear blocks are
// maximized exactly over the unit coefficient ball, so their contribution
// is invariant under ambient isometries.
inline ResidualReport stationarity_residual_ex(const DiscreteVarifold& V,
                                               const FieldBlocks& blocks) {
  ResidualReport rep;
  for (const auto& block : blocks.coeff_balls) {
    Eigen::VectorXd d(block.size());
    for (std::size_t i = 0; i < block.size(); ++i)
      d[(Eigen::Index)i] = -first_variation(V, block[i]);
    double nrm = d.norm();
    if (nrm > rep.value) {
      rep.value = nrm;
      std::vector<double> coeffs(block.size());
      for (std::size_t i = 0; i < block.size(); ++i) coeffs[i] = d[(Eigen::Index)i] / nrm;
      rep.best_field = combine_fields("ball-argmax", block, coeffs);
    }
  }
  for (const TestField& f : blocks.singletons) {
    double d = -first_variation(V, f);
    if (d > rep.value) {
      rep.value = d;
      rep.best_field = f;
    }
  }
  return rep;
}

inline double stationarity_residual(const DiscreteVarifold& V, double mass_bound = 0.0) {
  if (mass_bound > 0.0 && V.mass() > mass_bound)
    throw DomainError("stationarity_residual: mass bound exceeded");
  if (V.atoms.empty()) return 0.0;
  return stationarity_residual_ex(V, residual_blocks(V.domain)).value;
}

// Continuous-in-V descent selection: softmax weights over the candidate
// fields with positive descent, certified against -residual/2; the
// temperature is sharpened (and finally collapsed onto the argmax) when
// the mixed field loses too much descent.
inline TestField descent_field(const DiscreteVarifold& V, const FieldBlocks& blocks,
                               double temperature = 0.1) {
  ResidualReport rep = stationarity_residual_ex(V, blocks);
  if (rep.value <= 0.0) throw NumericError("descent_field: residual is zero, no descent");
  std::vector<TestField> cands = blocks.singletons;
  if (rep.best_field) cands.push_back(*rep.best_field);
  std::vector<double> scores(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i)
    scores[i] = -first_variation(V, cands[i]);
  double target = 0.5 * rep.value;
  for (double tau = temperature; tau > 1e-4; tau *= 0.25) {
    double smax = *std::max_element(scores.begin(), scores.end());
    std::vector<double> wts(cands.size());
    double tot = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      wts[i] = scores[i] > 0.0 ? std::exp((scores[i] - smax) / (tau * std::max(smax, 1e-12))) : 0.0;
      tot += wts[i];
    }
    for (double& w : wts) w /= tot;
    TestField mix = combine_fields("softmax-descent", cands, wts);
    if (-first_variation(V, mix) >= target) return mix;
  }
  return *rep.best_field;
}

// ---- tightening flows -------------------------------------------------------------

struct TightenResult {
  Slice slice;
  double residual_before = 0.0;
  double decrease = 0.0;
  int steps = 0;
  bool certified = true;  // decrease >= L(residual)/2 achieved
};

namespace detail {

// Explicit normalized shrink flow (tangentially projected measure gradient,
// sup speed <= 1) for the given duration.  Never lets the measure grow past
// +1e-12 relative; bisects the step when it would.
inline std::pair<double, int> shrink_flow(Slice& s, const Manifold& m, double duration,
                                          double step_factor, double measure_floor) {
  double m0 = measure(s);
  double current = m0;
  int steps = 0;
  double left = duration;
  bool any_progress = false;
  while (left > 1e-12 && steps < 20000) {
    std::vector<Vec> g = measure_gradient(s);
    double vmax = 0.0;
    std::vector<Vec> vel(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      vel[i] = -(m.tangent_projector(s.verts[i]) * g[i]);
      vmax = std::max(vmax, vel[i].norm());
    }
    if (vmax < 1e-14) break;
    double cap = std::max(1.0, vmax);
    double feat = 1e300;
    for (double f : local_feature_size(s)) feat = std::min(feat, f);
    if (feat > 1e200) break;
    double dt = std::min(step_factor * feat * cap / vmax, left);
    bool accepted = false;
    while (dt > 1e-14 * std::max(1.0, duration)) {
      Slice trial = s;
      for (std::size_t i = 0; i < trial.verts.size(); ++i)
        trial.verts[i] = m.project(s.verts[i] + (dt / cap) * vel[i]);
      double mt = measure(trial);
      if (mt <= current * (1.0 + 1e-12)) {
        s = std::move(trial);
        current = mt;
        left -= dt;
        ++steps;
        accepted = true;
        any_progress = true;
        break;
      }
      dt *= 0.5;
    }
    if (!accepted) {
      if (!any_progress)
        throw NumericError("tighten: step underflow before any decrease (stiffness)");
      break;
    }
    if (current < measure_floor) break;
  }
  return {m0 - current, steps};
}

}  // namespace detail

// Flows the slice down the measure gradient for time T(residual) and
// certifies the decrease against L(residual)/2, extending the flow up to
// four extra durations when the certificate is not yet met.
inline TightenResult tighten_slice(const Slice& s, const Manifold& m,
                                   const TighteningProfile& profile,
                                   double time_override = -1.0) {
  TightenResult out;
  out.slice = s;
  if (s.is_point_slice()) return out;
  DiscreteVarifold V = from_slice(s, profile.quad_order, Domain::on_manifold(m));
  FieldBlocks blocks = residual_blocks(V.domain);
  double gamma = stationarity_residual_ex(V, blocks).value;
  out.residual_before = gamma;
  double T = time_override >= 0.0 ? time_override : profile.time_map(gamma);
  if (T <= 0.0) return out;
  double need = 0.5 * profile.decrease_map(gamma);
  double floor_m = 1e-9 * std::max(measure(s), 1e-9);
  auto [dec, steps] = detail::shrink_flow(out.slice, m, T, profile.step_factor, floor_m);
  out.decrease = dec;
  out.steps = steps;
  double extra = 0.0;
  while (out.decrease < need && extra < 4.0 * T && measure(out.slice) > floor_m) {
    auto [d2, s2] = detail::shrink_flow(out.slice, m, T, profile.step_factor, floor_m);
    out.decrease += d2;
    out.steps += s2;
    extra += T;
    if (d2 <= 1e-15) break;
  }
  out.certified = out.decrease >= need - 1e-12;
  return out;
}

struct TightenFamilyResult {
  SweepOut family;
  bool converged = false;
  int rounds = 0;
  std::string csv_log;  // round,t,measure,residual,decrease
  std::vector<double> width_by_round;
};

// Per-time tightening with the flow times mollified across the grid (the
// smoothing that keeps the deformation a family move); F never increases,
// grid / T / budget are preserved.
inline TightenFamilyResult tighten_family(const SweepOut& f, const TighteningProfile& profile) {
  TightenFamilyResult out;
  out.family = f;
  std::ostringstream log;
  log << "round,t,measure,residual,decrease\n";
  int K = (int)f.times.size();
  for (int round = 1; round <= profile.max_rounds; ++round) {
    std::vector<double> gamma(K, 0.0), meas(K, 0.0);
    FieldBlocks blocks = residual_blocks(Domain::on_manifold(f.manifold));
    for (int i = 0; i < K; ++i) {
      const Slice& s = out.family.slices[i];
      meas[i] = measure(s);
      if (!s.is_point_slice()) {
        DiscreteVarifold V =
            from_slice(s, profile.quad_order, Domain::on_manifold(f.manifold));
        gamma[i] = stationarity_residual_ex(V, blocks).value;
      }
    }
    double F = *std::max_element(meas.begin(), meas.end());
    out.width_by_round.push_back(F);
    bool near_max_tight = true;
    for (int i = 0; i < K; ++i)
      if (meas[i] > F * (1.0 - profile.near_max_fraction) && gamma[i] > profile.residual_target)
        near_max_tight = false;
    if (near_max_tight) {
      out.converged = true;
      break;
    }
    // mollify the flow times over the grid (adjacent times use nearby flows)
    std::vector<double> T(K);
    for (int i = 0; i < K; ++i) T[i] = profile.time_map(gamma[i]);
    std::vector<double> Ts(K);
    for (int i = 0; i < K; ++i) {
      double acc = 2.0 * T[i], wsum = 2.0;
      if (i > 0) {
        acc += T[i - 1];
        wsum += 1.0;
      }
      if (i + 1 < K) {
        acc += T[i + 1];
        wsum += 1.0;
      }
      Ts[i] = acc / wsum;
    }
    out.rounds = round;
    for (int i = 0; i < K; ++i) {
      TightenResult r = tighten_slice(out.family.slices[i], f.manifold, profile, Ts[i]);
      out.family.slices[i] = std::move(r.slice);
      log << round << "," << f.times[i] << "," << measure(out.family.slices[i]) << ","
          << gamma[i] << "," << r.decrease << "\n";
    }
  }
  auto val = validate_sweepout(out.family);
  if (!val.ok)
    throw NumericError("tighten_family: continuity broken after smoothing (" + val.message +
                       "), refine the grid");
  out.csv_log = log.str();
  return out;
}

}  // namespace mmv
