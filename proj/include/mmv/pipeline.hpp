#pragma once

// End-to-end driver: build a Morse sweep-out, iterate the tightening loop,
// extract the min-max slice, attach varifold diagnostics (stationarity,
// monotonicity, tangent planes, smoothness, refutation searches), and emit
// a deterministic WidthReport with CSV logs and OBJ slices.

#include "mmv/localmin.hpp"

#include <filesystem>
#include <fstream>

namespace mmv {

struct RunConfig {
  Manifold manifold = Manifold::round_sphere2();
  std::string morse_name;  // empty -> the kind's default
  int K = 64;
  int mesh_res = 256;
  int max_rounds = 500;
  double residual_target = 0.0;  // 0 -> 1e-2 for curves, 5e-2 for surfaces
  double near_max_fraction = 0.02;
  double eps0 = 0.1;        // refutation epsilon schedule: eps_j = eps0 / j
  long am_budget = 2000;
  int am_regions = 4;
  double isoperimetric_c = 0.0;  // 0 -> per-kind constant
  double mass_bound_factor = 4.0;
  std::uint64_t seed = 1234;
  std::string out_dir;

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    c.manifold = Manifold::from_json(j.at("manifold"));
    c.morse_name = j.value("morse", std::string());
    c.K = j.value("K", 64);
    c.mesh_res = j.value("mesh_res", 256);
    c.max_rounds = j.value("max_rounds", 500);
    c.residual_target = j.value("residual_target", 0.0);
    c.near_max_fraction = j.value("near_max_fraction", 0.02);
    c.eps0 = j.value("eps0", 0.1);
    c.am_budget = j.value("am_budget", 2000L);
    c.am_regions = j.value("am_regions", 4);
    c.isoperimetric_c = j.value("isoperimetric_c", 0.0);
    c.seed = j.value("seed", (std::uint64_t)1234);
    c.out_dir = j.value("out_dir", std::string());
    return c;
  }

  nlohmann::json to_json() const {
    return {{"manifold", manifold.to_json()},
            {"morse", morse_name},
            {"K", K},
            {"mesh_res", mesh_res},
            {"max_rounds", max_rounds},
            {"residual_target", residual_target},
            {"near_max_fraction", near_max_fraction},
            {"eps0", eps0},
            {"am_budget", am_budget},
            {"am_regions", am_regions},
            {"isoperimetric_c", isoperimetric_c},
            {"seed", seed},
            {"out_dir", out_dir}};
  }

  std::string effective_morse() const {
    return morse_name.empty() ? manifold.morse_function_names().front() : morse_name;
  }
  double effective_residual_target() const {
    if (residual_target > 0.0) return residual_target;
    return manifold.dim() == 2 ? 1e-2 : 5e-2;
  }
};

struct WidthReport {
  double width = 0.0;
  double argmax_time = 0.0;
  Slice limit_slice;
  double residual = 0.0;
  std::string monotonicity_verdict;
  std::string tangent_verdict;
  double smoothness = 0.0;
  bool converged = false;
  int rounds = 0;
  double lower_bound = 0.0;
  double lower_bound_certificate = 0.0;
  nlohmann::json am_log = nlohmann::json::array();
  std::vector<std::string> warnings;
  std::vector<double> width_by_round;
  std::string rounds_csv;
  nlohmann::json config_echo;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["width"] = width;
    j["argmax_time"] = argmax_time;
    j["residual"] = residual;
    j["monotonicity_verdict"] = monotonicity_verdict;
    j["tangent_verdict"] = tangent_verdict;
    j["smoothness"] = smoothness;
    j["converged"] = converged;
    j["rounds"] = rounds;
    j["lower_bound"] = lower_bound;
    j["lower_bound_certificate"] = lower_bound_certificate;
    j["am_log"] = am_log;
    j["warnings"] = warnings;
    j["width_by_round"] = width_by_round;
    j["limit_slice"] = slice_to_json(limit_slice);
    j["config"] = config_echo;
    return j;
  }
};

// Nondecreasing within 2% relative slack per step plus an absolute atom
// quantization allowance.
inline bool nondecreasing_within_slack(const std::vector<double>& series, double atom_noise,
                                       double slack = 0.02) {
  for (std::size_t i = 0; i + 1 < series.size(); ++i)
    if (series[i + 1] < series[i] * (1.0 - slack) - atom_noise) return false;
  return true;
}

inline WidthReport run_min_max(const RunConfig& cfg) {
  WidthReport rep;
  rep.config_echo = cfg.to_json();
  const Manifold& man = cfg.manifold;

  SweepOut family = morse_sweepout(man, cfg.effective_morse(), cfg.K, cfg.mesh_res);

  auto iso = isoperimetric_lower_bound(man, family, cfg.isoperimetric_c);
  rep.lower_bound = iso.bound;
  rep.lower_bound_certificate = iso.bisect_measure;

  TighteningProfile prof = TighteningProfile::defaults();
  prof.max_rounds = cfg.max_rounds;
  prof.residual_target = cfg.effective_residual_target();
  prof.near_max_fraction = cfg.near_max_fraction;

  rep.width_by_round.push_back(max_slice(family).second);
  TightenFamilyResult tf = tighten_family(family, prof);
  rep.converged = tf.converged;
  rep.rounds = tf.rounds;
  rep.rounds_csv = tf.csv_log;
  family = tf.family;
  auto [argmax, width] = max_slice(family);
  rep.width = width;
  rep.argmax_time = family.times[argmax];
  rep.limit_slice = family.slices[argmax];
  rep.width_by_round.push_back(width);
  if (rep.lower_bound > rep.width + 1e-9)
    rep.warnings.push_back("isoperimetric lower bound exceeds the measured width");

  Domain dom = Domain::on_manifold(man);
  DiscreteVarifold V = from_slice(rep.limit_slice, 2, dom);
  double mass_bound = cfg.mass_bound_factor * rep.width;
  for (const Slice& s : family.slices)
    if (measure(s) > mass_bound) {
      rep.warnings.push_back("slice mass transiently exceeds the 4 m0 bound (clamped)");
      break;
    }
  rep.residual = stationarity_residual(V);

  // monotonicity of the density ratio at a support point of the limit slice
  {
    Rng rng(cfg.seed);
    Vec x = rep.limit_slice.verts.empty() ? man.sample_uniform(rng) : rep.limit_slice.verts[0];
    std::vector<double> radii;
    double rmax = 0.45 * man.inj_radius_bound();
    for (int i = 1; i <= 20; ++i) radii.push_back(rmax * i / 20.0);
    auto series = monotonicity_ratio(V, x, radii);
    double max_w = 0.0;
    for (const Atom& a : V.atoms) max_w = std::max(max_w, a.w);
    double noise = 16.0 * max_w / density_normalizer(V.dim, radii.front());
    rep.monotonicity_verdict =
        nondecreasing_within_slack(series, noise) ? "nondecreasing-within-slack" : "violated";
  }

  // tangent plane verdict at a sampled support point
  {
    Vec x = rep.limit_slice.verts[rep.limit_slice.verts.size() / 3];
    double r0 = 0.3 * man.inj_radius_bound();
    TangentVerdict tv = tangent_plane_verdict(V, x, {r0, 0.5 * r0, 0.25 * r0});
    if (tv.verdict == PlaneVerdict::Planar)
      rep.tangent_verdict = "planar m=" + std::to_string(tv.multiplicity);
    else if (tv.verdict == PlaneVerdict::NonPlanar)
      rep.tangent_verdict = "non-planar";
    else
      rep.tangent_verdict = "inconclusive";
  }

  // smoothness diagnostic in a ball around a support point
  {
    Vec x = rep.limit_slice.verts[0];
    rep.smoothness =
        smoothness_diagnostic(rep.limit_slice, x, 0.45 * man.inj_radius_bound(), &man);
  }

  // refutation searches on sampled balls + the dichotomy bookkeeping
  {
    Rng rng(cfg.seed);
    std::vector<AmRecord> records;
    double r0 = 0.25 * man.inj_radius_bound();
    for (int k = 0; k < cfg.am_regions; ++k) {
      std::size_t vi = (std::size_t)(uniform(rng, 0.0, 1.0) * rep.limit_slice.verts.size());
      vi = std::min(vi, rep.limit_slice.verts.size() - 1);
      RegionSpec region{rep.limit_slice.verts[vi], 0.0, r0};
      AdversarySpec adv = default_adversaries(region, man.embed_dim());
      AmVerdict v = am_certifier(rep.limit_slice, &man, region, cfg.eps0, adv, cfg.am_budget);
      AmRecord rec;
      rec.slice_index = argmax;
      rec.center = region.center;
      rec.radius = r0;
      rec.refuted = v.refuted;
      rec.budget = v.budget_spent;
      records.push_back(rec);
      rep.am_log.push_back({{"center", {region.center[0], region.center[1], region.center[2],
                                        region.center[3]}},
                            {"radius", r0},
                            {"eps", cfg.eps0},
                            {"refuted", v.refuted},
                            {"budget_spent", v.budget_spent},
                            {"witness", v.witness_id}});
    }
    AnnulusSchedule sched = am_annulus_schedule((int)family.slices.size(), records, r0);
    rep.am_log.push_back({{"schedule_consistent", sched.consistent},
                          {"surviving", sched.surviving.size()},
                          {"exceptional", sched.exceptional_center.has_value()}});
  }

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir + "/slices");
    fs::create_directories(cfg.out_dir + "/logs");
    std::ofstream(cfg.out_dir + "/report.json") << rep.to_json().dump(2) << "\n";
    write_obj_file(cfg.out_dir + "/slices/limit.obj", rep.limit_slice);
    for (int i : {0, (int)family.slices.size() / 2, (int)family.slices.size() - 1})
      write_obj_file(cfg.out_dir + "/slices/slice_" + std::to_string(i) + ".obj",
                     family.slices[i]);
    std::ofstream(cfg.out_dir + "/logs/rounds.csv") << rep.rounds_csv;
    std::ofstream area(cfg.out_dir + "/logs/area.csv");
    write_area_csv(area, family);
    std::ofstream plot(cfg.out_dir + "/plot.gp");
    plot << "set datafile separator ','\n"
         << "set xlabel 't'\nset ylabel 'measure'\n"
         << "plot 'logs/area.csv' using 1:2 with lines title 'slice measure'\n";
  }
  return rep;
}

// ---- fixture suites ------------------------------------------------------------

struct FixtureCheck {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double expected = 0.0;
  std::string note;
};

inline std::vector<FixtureCheck> run_fixtures(const std::string& selector) {
  std::vector<FixtureCheck> table;
  auto add = [&](const std::string& name, bool pass, double measured, double expected,
                 const std::string& note = "") {
    table.push_back({name, pass, measured, expected, note});
  };

  bool all = selector == "all";
  bool known = all;
  if (selector == "appendixC" || all) {
    known = true;
    DiscreteVarifold V1 = three_lines_fixture(), V2 = hexagon_fixture();
    add("appendixC mass lines", std::abs(V1.mass() - 12.0) <= 1e-9, V1.mass(), 12.0);
    add("appendixC mass hexagon", std::abs(V2.mass() - 12.0) <= 1e-9, V2.mass(), 12.0);
    double r1 = stationarity_residual(V1), r2 = stationarity_residual(V2);
    add("appendixC stationary lines", r1 <= 1e-8, r1, 1e-8, "residual");
    add("appendixC stationary hexagon", r2 <= 1e-8, r2, 1e-8, "residual");
    double d = varifold_distance(V1, V2);
    add("appendixC distinguishable", d >= 0.05, d, 0.05, "probe metric");
    auto in_ring = [](const Atom& a) { return a.x.norm() > 1.0 + 1e-12; };
    auto W1 = restrict_atoms(V1, in_ring), W2 = restrict_atoms(V2, in_ring);
    double ring = varifold_distance(W1, W2);
    add("appendixC equal outside unit disk", ring <= 1e-12, ring, 0.0);
  }
  if (selector == "appendixB" || all) {
    known = true;
    // maximum principle: line tangent to a disk leaves it
    DiscreteVarifold line =
        line_varifold(vec2(0, 1), vec2(1, 0), 2.0, 4096, 1.0, Domain::euclidean(2, 2.5));
    auto res = convex_touch_check(line, vec2(0, 0.5), 0.5, vec2(0, 1), 0.4,
                                  standard_dictionary(line.domain));
    add("appendixB tangent line consistent", res.verdict == TouchVerdict::Consistent, 0, 0);
    // transversality fractions
    DiscreteVarifold radial = line_varifold(Vec::Zero(), vec2(1, 0), 1.0, 512);
    add("appendixB radial transversal", transversal_density_check(radial, Vec::Zero(), 0.9, 256) ==
                                            1.0,
        transversal_density_check(radial, Vec::Zero(), 0.9, 256), 1.0);
    DiscreteVarifold circ = circle_varifold(Vec::Zero(), 0.7, 512);
    add("appendixB centered circle tangential",
        transversal_density_check(circ, Vec::Zero(), 0.9, 256) == 0.0,
        transversal_density_check(circ, Vec::Zero(), 0.9, 256), 0.0);
    DiscreteVarifold ell = ellipse_varifold(vec2(0.13, -0.07), 0.8, 0.5, 1024);
    double frac = transversal_density_check(ell, Vec::Zero(), 1.6, 512);
    add("appendixB generic ellipse transversal", frac >= 0.99, frac, 0.99);
  }
  if (selector == "covering" || all) {
    known = true;
    // exhaustive interval patterns r <= 4 on a 12-cell lattice (the full
    // r <= 6 / 24-cell sweep runs in the acceptance suite)
    auto sweep = exhaustive_covering_sweep(12, 4, 2);
    add("covering exhaustive (r<=4, 12 cells)",
        sweep.patterns > 0 && sweep.passed == sweep.patterns && sweep.splits > 0,
        double(sweep.passed), double(sweep.patterns),
        std::to_string(sweep.splits) + " split cases");
    // random well-separated pair instances against brute force
    Domain geom = Domain::euclidean(3, 100.0);
    Rng rng(7);
    int okc = 0;
    const int trials = 200;
    for (int tr = 0; tr < trials; ++tr) {
      auto rnd_pair = [&]() {
        double d1 = uniform(rng, 0.2, 1.0), d2 = uniform(rng, 0.2, 1.0);
        Vec c1 = vec3(uniform(rng, -10, 10), uniform(rng, -10, 10), 0);
        double need = 2.0 * std::min(2.0 * d1, 2.0 * d2) + d1 + d2;
        double ang = uniform(rng, 0, 2 * kPi);
        Vec c2 = c1 + (need + uniform(rng, 0.01, 3.0)) * vec3(std::cos(ang), std::sin(ang), 0);
        return RegionPair{{c1, 0.0, d1}, {c2, 0.0, d2}};
      };
      RegionPair P = rnd_pair(), Q = rnd_pair();
      auto [i, j] = select_disjoint_pair(geom, P, Q);
      double best = -1.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          best = std::max(best, region_distance(geom, P.side(a), Q.side(b)));
      double got = region_distance(geom, P.side(i), Q.side(j));
      if (got > 0.0 && std::abs(got - best) <= 1e-12) ++okc;
    }
    add("pair selection vs brute force", okc == trials, okc, trials);
  }
  if (selector == "squeeze-euclid" || all) {
    known = true;
    auto sc = verify_squeeze_constants(Manifold::flat_torus3(4.0), {0.1, 0.2});
    add("squeeze-euclid mu", std::abs(sc.mu - 1.0) <= 1e-6, sc.mu, 1.0);
  }
  if (selector == "squeeze-sphere" || all) {
    known = true;
    auto s2 = verify_squeeze_constants(Manifold::round_sphere2(), {0.2});
    add("squeeze S2 mu(0.2)", s2.mu <= 1.05, s2.mu, 1.05);
    auto s3 = verify_squeeze_constants(Manifold::round_sphere3(), {0.2});
    add("squeeze S3 mu(0.2)", s3.mu <= 1.1, s3.mu, 1.1);
  }
  if (!known) throw DomainError("unknown fixture selector: " + selector);
  return table;
}

}  // namespace mmv
