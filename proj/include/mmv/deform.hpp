#pragma once

// Combinatorial deformation engine: distant-pair selection over the class
// of well-separated region pairs, covering refinement with the (A1)/(A2)/(B')
// properties, bump-function gluing of local isotopies into one family
// deformation, the 1/(2L) width-drop competitor with its per-slice
// accounting, the isotopy-refutation certifier, and the ball/annulus
// dichotomy bookkeeping.

#include "mmv/sweepout.hpp"
#include "mmv/tighten.hpp"

#include <iomanip>
#include <optional>

namespace mmv {

// ---- regions ---------------------------------------------------------------------

// Metric ball (inner = 0) or open annulus around `center`.
struct RegionSpec {
  Vec center = Vec::Zero();
  double inner = 0.0;
  double outer = 0.0;

  double diam() const { return 2.0 * outer; }
  bool contains(const Domain& dom, const Vec& p) const {
    double d = dom.distance(center, p);
    return d > inner && d < outer;
  }
};

// Distance between two ball/annulus regions (0 when they meet).  Exact for
// balls in flat geometry; a shell lying inside the other's hole is handled.
inline double region_distance(const Domain& dom, const RegionSpec& a, const RegionSpec& b) {
  double D = dom.distance(a.center, b.center);
  double cand = D - a.outer - b.outer;
  cand = std::max(cand, a.inner - D - b.outer);
  cand = std::max(cand, b.inner - D - a.outer);
  return std::max(0.0, cand);
}

struct RegionPair {
  RegionSpec a, b;
  const RegionSpec& side(int i) const { return i == 0 ? a : b; }
};

// Membership in the well-separated class: d(U1, U2) >= 2 min(diam).
inline bool well_separated(const Domain& dom, const RegionPair& p) {
  return region_distance(dom, p.a, p.b) >= 2.0 * std::min(p.a.diam(), p.b.diam());
}

// Picks (i, j) with d(P_i, Q_j) > 0; deterministic tie-break by the
// lexicographically smallest pair among the distance maximizers.
inline std::pair<int, int> select_disjoint_pair(const Domain& dom, const RegionPair& P,
                                                const RegionPair& Q) {
  if (!well_separated(dom, P) || !well_separated(dom, Q))
    throw DomainError("select_disjoint_pair: pair not in the well-separated class");
  double best = -1.0;
  std::pair<int, int> arg{0, 0};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double d = region_distance(dom, P.side(i), Q.side(j));
      if (d > best + 1e-15) {
        best = d;
        arg = {i, j};
      }
    }
  if (!(best > 0.0))
    throw NumericError("select_disjoint_pair: no positive-distance combination (bug trap)");
  return arg;
}

// ---- isotopy generators -------------------------------------------------------------

// A parametric isotopy surrogate: map(s, .) with map(0, .) = identity,
// supported in `support`.
struct IsotopyGenerator {
  std::string id;
  RegionSpec support;
  std::function<Vec(double s, const Vec&)> map;
};

// Radial contraction toward `center`: factor 1 - s*depth on the bump plateau.
inline IsotopyGenerator radial_shrink_isotopy(const Vec& center, double radius, double depth,
                                              const std::string& id = "shrink") {
  IsotopyGenerator g;
  g.id = id;
  g.support = {center, 0.0, radius};
  g.map = [center, radius, depth](double s, const Vec& y) -> Vec {
    Vec d = y - center;
    double b = bump1(d.norm() / radius);
    return center + (1.0 - s * depth * b) * d;
  };
  return g;
}

// Bump-supported translation.
inline IsotopyGenerator translate_isotopy(const Vec& center, double radius, const Vec& dir,
                                          double dist, const std::string& id = "translate") {
  IsotopyGenerator g;
  g.id = id;
  g.support = {center, 0.0, radius};
  g.map = [center, radius, dir, dist](double s, const Vec& y) -> Vec {
    return y + s * dist * bump1((y - center).norm() / radius) * dir;
  };
  return g;
}

// Squeeze along one axis (pinches the region onto the orthogonal plane).
inline IsotopyGenerator pinch_isotopy(const Vec& center, double radius, const Vec& axis,
                                      double depth, const std::string& id = "pinch") {
  IsotopyGenerator g;
  g.id = id;
  g.support = {center, 0.0, radius};
  Vec u = axis.normalized();
  g.map = [center, radius, u, depth](double s, const Vec& y) -> Vec {
    Vec d = y - center;
    double b = bump1(d.norm() / radius);
    return y - (s * depth * b * d.dot(u)) * u;
  };
  return g;
}

// Radial scaling with an arbitrary factor path lambda(s) (lambda(0) = 1);
// used to build excursion-capped refuters.
inline IsotopyGenerator scale_path_isotopy(const Vec& center, double radius,
                                           std::function<double(double)> lambda,
                                           const std::string& id = "scale-path") {
  IsotopyGenerator g;
  g.id = id;
  g.support = {center, 0.0, radius};
  g.map = [center, radius, lambda](double s, const Vec& y) -> Vec {
    Vec d = y - center;
    double b = bump1(d.norm() / radius);
    return center + (1.0 + (lambda(s) - 1.0) * b) * d;
  };
  return g;
}

// ---- covering refinement -------------------------------------------------------------

struct Interval {
  double lo = 0.0, hi = 0.0;
  bool overlaps(const Interval& o) const { return !(hi < o.lo || o.hi < lo); }
  bool contains_interior(double t) const { return t > lo && t < hi; }
  double mid() const { return 0.5 * (lo + hi); }
};

struct CoveringInput {
  std::vector<Interval> intervals;                        // sorted, satisfying (A)
  std::vector<RegionPair> pairs;                          // one well-separated pair each
  std::vector<std::array<IsotopyGenerator, 2>> isotopies; // the two refuting isotopies
  std::vector<double> cover_set;                          // K: finite set of times to cover
};

struct PlanItem {
  Interval J;
  RegionSpec region;
  IsotopyGenerator isotopy;
  int source_interval = -1;
  int source_side = -1;
  // bump data (set by glue_deformation): quintic ramps, == 1 on [p_lo, p_hi]
  double plateau_lo = 0.0, plateau_hi = 0.0;
  bool has_plateau = false;
};

struct DeformationPlan {
  std::vector<PlanItem> items;
  Domain geometry = Domain::euclidean(3);

  double bump(std::size_t i, double t) const {
    const PlanItem& it = items[i];
    if (t <= it.J.lo || t >= it.J.hi) return 0.0;
    if (!it.has_plateau) return 0.0;
    if (t < it.plateau_lo) return smoothstep5((t - it.J.lo) / (it.plateau_lo - it.J.lo));
    if (t > it.plateau_hi) return smoothstep5((it.J.hi - t) / (it.J.hi - it.plateau_hi));
    return 1.0;
  }

  std::vector<std::size_t> active(double t) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (bump(i, t) > 0.0) out.push_back(i);
    return out;
  }

  Vec apply_point(double t, const Vec& y) const {
    Vec z = y;
    for (std::size_t i : active(t)) z = items[i].isotopy.map(bump(i, t), z);
    return z;
  }

  FamilyDeformation as_family_deformation(const std::string& label = "glued-plan") const {
    auto self = std::make_shared<DeformationPlan>(*this);
    FamilyDeformation d;
    d.label = label;
    d.map = [self](double t, const Vec& y) { return self->apply_point(t, y); };
    return d;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const PlanItem& it : items) {
      j.push_back({{"interval", {it.J.lo, it.J.hi}},
                   {"plateau", {it.plateau_lo, it.plateau_hi}},
                   {"generator", it.isotopy.id},
                   {"region",
                    {{"center", {it.region.center[0], it.region.center[1], it.region.center[2],
                                 it.region.center[3]}},
                     {"inner", it.region.inner},
                     {"outer", it.region.outer}}},
                   {"source_interval", it.source_interval},
                   {"source_side", it.source_side}});
    }
    return j;
  }
};

// Validates the (A) hypotheses on the input covering.
inline void validate_covering_input(const CoveringInput& in) {
  std::size_t r = in.intervals.size();
  if (in.pairs.size() != r || in.isotopies.size() != r)
    throw DomainError("covering input: size mismatch");
  for (std::size_t j = 0; j + 1 < r; ++j)
    if (in.intervals[j].lo > in.intervals[j + 1].lo)
      throw DomainError("covering input: intervals not sorted");
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t k = j + 2; k < r; ++k)
      if (in.intervals[j].overlaps(in.intervals[k]))
        throw DomainError("covering input violates (A): non-adjacent intervals overlap");
  for (double t : in.cover_set) {
    bool covered = false;
    for (const Interval& I : in.intervals) covered = covered || I.contains_interior(t);
    if (!covered) throw DomainError("covering input violates (A): cover point not interior");
  }
}

// The left-to-right refinement: distant-pair selections are propagated as
// forced choices; a middle interval whose forced side conflicts with the
// next selection is split into two closed subintervals whose interiors
// still cover it, each compatible with one neighbor.  Cardinality <= 2r-1.
inline DeformationPlan refine_covering(const CoveringInput& in, const Domain& geom) {
  validate_covering_input(in);
  DeformationPlan plan;
  plan.geometry = geom;
  std::size_t r = in.intervals.size();
  int forced = -1;
  auto emit = [&](const Interval& J, int j, int side) {
    PlanItem it;
    it.J = J;
    it.region = in.pairs[j].side(side);
    it.isotopy = in.isotopies[j][side];
    it.source_interval = j;
    it.source_side = side;
    plan.items.push_back(std::move(it));
  };
  for (std::size_t j = 0; j < r; ++j) {
    bool overlap_next = j + 1 < r && in.intervals[j].overlaps(in.intervals[j + 1]);
    if (!overlap_next) {
      emit(in.intervals[j], (int)j, forced >= 0 ? forced : 0);
      forced = -1;
      continue;
    }
    auto [i, k] = select_disjoint_pair(geom, in.pairs[j], in.pairs[j + 1]);
    if (forced < 0 || forced == i) {
      emit(in.intervals[j], (int)j, i);
    } else {
      // split: the left part keeps the forced side, the right part takes i
      double m1 = std::max(in.intervals[j].lo, in.intervals[j - 1].hi);
      double m2 = std::min(in.intervals[j].hi, in.intervals[j + 1].lo);
      if (!(m1 < m2))
        throw NumericError("refine_covering: no room to split (input violates (A))");
      double alpha = m1 + (m2 - m1) / 3.0, beta = m1 + 2.0 * (m2 - m1) / 3.0;
      emit({in.intervals[j].lo, beta}, (int)j, forced);
      emit({alpha, in.intervals[j].hi}, (int)j, i);
    }
    forced = k;
  }
  std::sort(plan.items.begin(), plan.items.end(),
            [](const PlanItem& a, const PlanItem& b) { return a.J.lo < b.J.lo; });
  if (plan.items.size() > 2 * r - 1) throw NumericError("refine_covering: cardinality bound broken");
  return plan;
}

struct CoveringCheck {
  bool a1 = true, a2 = true, b_support = true;
  double min_overlap_margin = 1e300;  // min region distance among overlapping items
  std::string message;
};

// Exhaustive verification of (A1), (A2), (B') on a refined plan.
inline CoveringCheck check_covering_properties(const DeformationPlan& plan,
                                               const std::vector<double>& cover_set) {
  CoveringCheck c;
  const auto& items = plan.items;
  for (double t : cover_set) {
    bool covered = false;
    for (const PlanItem& it : items) covered = covered || it.J.contains_interior(t);
    if (!covered) {
      c.a1 = false;
      c.message = "cover point escapes interiors";
    }
  }
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t k = i + 2; k < items.size(); ++k)
      if (items[i].J.overlaps(items[k].J)) {
        c.a1 = false;
        c.message = "non-adjacent refined intervals overlap";
      }
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t k = i + 1; k < items.size(); ++k)
      if (items[i].J.overlaps(items[k].J)) {
        double d = region_distance(plan.geometry, items[i].region, items[k].region);
        c.min_overlap_margin = std::min(c.min_overlap_margin, d);
        if (!(d > 0.0)) {
          c.a2 = false;
          c.message = "overlapping intervals with touching regions";
        }
      }
  for (const PlanItem& it : items) {
    double d = region_distance(plan.geometry, it.isotopy.support, it.region);
    bool inside = it.isotopy.support.outer <= it.region.outer + 1e-12 &&
                  plan.geometry.distance(it.isotopy.support.center, it.region.center) <=
                      it.region.outer - it.isotopy.support.outer + 1e-9;
    (void)d;
    if (!inside) {
      c.b_support = false;
      c.message = "isotopy support escapes its region";
    }
  }
  return c;
}

// Assigns the quintic bumps: each cover point is owned by its deepest
// interval, plateaus span the owned points, ramps stay inside J_i.
inline DeformationPlan glue_deformation(DeformationPlan plan,
                                        const std::vector<double>& cover_set) {
  auto depth = [](const Interval& J, double t) { return std::min(t - J.lo, J.hi - t); };
  for (PlanItem& it : plan.items) {
    it.plateau_lo = it.J.mid();
    it.plateau_hi = it.J.mid();
    it.has_plateau = true;
  }
  for (double t : cover_set) {
    int owner = -1;
    double best = -1.0;
    for (std::size_t i = 0; i < plan.items.size(); ++i) {
      if (!plan.items[i].J.contains_interior(t)) continue;
      double d = depth(plan.items[i].J, t);
      if (d > best) {
        best = d;
        owner = (int)i;
      }
    }
    if (owner < 0) throw NumericError("glue_deformation: cover point not owned by any interval");
    PlanItem& it = plan.items[owner];
    it.plateau_lo = std::min(it.plateau_lo, t);
    it.plateau_hi = std::max(it.plateau_hi, t);
  }
  for (PlanItem& it : plan.items) {
    if (!(it.plateau_lo > it.J.lo && it.plateau_hi < it.J.hi))
      throw NumericError("glue_deformation: bump support would exceed its interval");
  }
  // at every time at most two items act, on regions at positive distance
  std::vector<double> probes = cover_set;
  for (const PlanItem& it : plan.items) {
    probes.push_back(it.J.lo + 1e-9);
    probes.push_back(it.J.hi - 1e-9);
    probes.push_back(it.J.mid());
  }
  for (double t : probes) {
    auto act = plan.active(t);
    if (act.size() > 2) throw NumericError("glue_deformation: more than two plans act at a time");
    if (act.size() == 2 &&
        !(region_distance(plan.geometry, plan.items[act[0]].region,
                          plan.items[act[1]].region) > 0.0))
      throw NumericError("glue_deformation: simultaneous plans on touching regions");
  }
  return plan;
}

// ---- exhaustive covering sweeps ---------------------------------------------------------

struct CoveringSweepResult {
  long patterns = 0;
  long passed = 0;
  long splits = 0;      // patterns where the conflict branch fired
  long max_items = 0;
  std::string first_failure;
};

// Enumerates every interval pattern with r <= rmax on a [0, cells] lattice
// (interval length <= maxlen cells, sorted, satisfying the (A) input
// hypotheses), attaches a deterministic pool of well-separated pairs whose
// distant-side selections conflict along chains, refines, glues, and
// verifies (A1), (A2), (B') plus the 2r-1 cardinality bound exhaustively.
inline CoveringSweepResult exhaustive_covering_sweep(int cells, int rmax, int maxlen) {
  Domain geom = Domain::euclidean(3, 1e6);
  CoveringSweepResult res;

  // pair pool: vertical stacks with parity offsets so that consecutive
  // distant-side selections flip sides and force interval splits
  auto pool_pair = [&](int j) -> RegionPair {
    double y = 50.0 * j;
    double off = (j % 2 == 0) ? 0.0 : 30.0;
    RegionSpec a{vec3(0.0 + off, y, 0), 0.0, 1.0};
    RegionSpec b{vec3(15.0 + off, y + 7.0, 0), 0.0, 1.0};
    return {a, b};
  };
  auto pool_isos = [&](const RegionPair& p) -> std::array<IsotopyGenerator, 2> {
    return {radial_shrink_isotopy(p.a.center, 1.0, 0.05),
            radial_shrink_isotopy(p.b.center, 1.0, 0.05)};
  };

  std::vector<Interval> acc;
  std::function<void(int)> emit_and_recurse = [&](int min_lo) {
    if (!acc.empty()) {
      ++res.patterns;
      CoveringInput in;
      in.intervals = acc;
      for (std::size_t j = 0; j < acc.size(); ++j) {
        in.pairs.push_back(pool_pair((int)j));
        in.isotopies.push_back(pool_isos(in.pairs.back()));
      }
      for (std::size_t j = 0; j < acc.size(); ++j) {
        in.cover_set.push_back(acc[j].mid());
        if (j + 1 < acc.size() && acc[j].overlaps(acc[j + 1])) {
          double lo = std::max(acc[j].lo, acc[j + 1].lo);
          double hi = std::min(acc[j].hi, acc[j + 1].hi);
          double mid = 0.5 * (lo + hi);
          if (acc[j].contains_interior(mid) || acc[j + 1].contains_interior(mid))
            in.cover_set.push_back(mid);
        }
      }
      try {
        DeformationPlan plan = refine_covering(in, geom);
        if (plan.items.size() > acc.size()) ++res.splits;
        plan = glue_deformation(std::move(plan), in.cover_set);
        auto chk = check_covering_properties(plan, in.cover_set);
        res.max_items = std::max(res.max_items, (long)plan.items.size());
        if (chk.a1 && chk.a2 && chk.b_support &&
            plan.items.size() <= 2 * acc.size() - 1)
          ++res.passed;
        else if (res.first_failure.empty())
          res.first_failure = chk.message.empty() ? "cardinality" : chk.message;
      } catch (const std::exception& e) {
        if (res.first_failure.empty()) res.first_failure = e.what();
      }
    }
    if ((int)acc.size() == rmax) return;
    for (int lo = min_lo; lo < cells; ++lo)
      for (int len = 1; len <= maxlen && lo + len <= cells; ++len) {
        Interval I{double(lo), double(lo + len)};
        bool ok = true;
        for (std::size_t k = 0; k + 1 < acc.size(); ++k)
          if (acc[k].overlaps(I)) ok = false;  // (A) vs all non-adjacent
        if (!ok) continue;
        acc.push_back(I);
        emit_and_recurse(lo + 1);
        acc.pop_back();
      }
  };
  emit_and_recurse(0);
  return res;
}

// ---- the width-drop competitor ---------------------------------------------------------

struct Refuter {
  RegionPair regions;
  std::array<IsotopyGenerator, 2> isotopies;
};

struct WidthDropResult {
  SweepOut family;
  bool changed = false;
  double width_before = 0.0;
  double width_after = 0.0;
  double claimed_bound = 0.0;      // F - 1/(2L) + grid tolerance
  double grid_tolerance = 0.0;
  std::string accounting_csv;      // t,case,measure_before,measure_after
  DeformationPlan plan;
};

// Builds the glued competitor from per-slice refuting pairs on the
// large-measure set K = { measure >= F - 1/L }; validates the decrease /
// excursion thresholds (1/(2L) and 1/(4L)) before gluing.  A K-slice
// without a refuter aborts: that is the almost-minimizing signal.
inline WidthDropResult width_drop_competitor(const SweepOut& f, int L,
                                             const std::map<int, Refuter>& refuters,
                                             const Domain& geom) {
  if (L <= 0) throw DomainError("width_drop_competitor: L must be positive");
  WidthDropResult out;
  auto [argmax, F] = max_slice(f);
  (void)argmax;
  out.width_before = F;
  const double oneL = 1.0 / L;
  std::vector<int> K;
  for (std::size_t i = 0; i < f.slices.size(); ++i)
    if (measure(f.slices[i]) >= F - oneL) K.push_back((int)i);
  if (K.empty()) {
    out.family = f;
    out.width_after = F;
    out.claimed_bound = F;
    out.accounting_csv = "t,case,measure_before,measure_after\n";
    return out;
  }

  // validate (C') / (D') on every K slice
  for (int i : K) {
    auto it = refuters.find(i);
    if (it == refuters.end())
      throw NumericError("width_drop_competitor: cannot build, slice " + std::to_string(i) +
                         " has no refuting pair (almost-minimizing signal)");
    const Slice& s = f.slices[i];
    double m0 = measure(s);
    for (int side = 0; side < 2; ++side) {
      const IsotopyGenerator& g = it->second.isotopies[side];
      double worst = 0.0, final_m = 0.0;
      for (int q = 0; q <= 32; ++q) {
        double sp = double(q) / 32.0;
        Slice moved = map_slice(s, [&](const Vec& y) { return g.map(sp, y); });
        double mm = measure(moved);
        worst = std::max(worst, mm - m0);
        if (q == 32) final_m = mm;
      }
      if (final_m > m0 - 0.5 * oneL + 1e-9)
        throw NumericError("width_drop_competitor: refuter decrease below 1/(2L) on slice " +
                           std::to_string(i));
      if (worst > 0.25 * oneL + 1e-9)
        throw NumericError("width_drop_competitor: refuter excursion above 1/(4L) on slice " +
                           std::to_string(i));
    }
  }

  // cover K by interval chunks (<= 6 grid steps, 1-step overlaps inside runs)
  double dt = f.times[1] - f.times[0];
  CoveringInput cov;
  cov.cover_set.reserve(K.size());
  for (int i : K) cov.cover_set.push_back(f.times[i]);
  std::size_t p = 0;
  while (p < K.size()) {
    std::size_t q = p;
    while (q + 1 < K.size() && K[q + 1] == K[q] + 1) ++q;  // run [p..q]
    std::size_t c0 = p;
    while (c0 <= q) {
      std::size_t c1 = std::min(q, c0 + 5);
      Interval I{f.times[K[c0]] - 0.6 * dt, f.times[K[c1]] + 0.6 * dt};
      I.lo = std::max(I.lo, 0.0);
      I.hi = std::min(I.hi, 1.0);
      int rep = K[c0];
      for (std::size_t c = c0; c <= c1; ++c)
        if (measure(f.slices[K[c]]) > measure(f.slices[rep])) rep = K[c];
      cov.intervals.push_back(I);
      cov.pairs.push_back(refuters.at(rep).regions);
      cov.isotopies.push_back(refuters.at(rep).isotopies);
      if (c1 == q) break;
      c0 = c1;  // 1-chunk overlap
    }
    p = q + 1;
  }

  out.plan = glue_deformation(refine_covering(cov, geom), cov.cover_set);
  out.family = apply_saturation_move(f, out.plan.as_family_deformation("width-drop"));
  out.grid_tolerance = 2.0 * f.delta_cont / std::sqrt(double(f.grid_size()));

  std::ostringstream acc;
  acc << "t,case,measure_before,measure_after\n";
  double newF = 0.0;
  for (std::size_t i = 0; i < f.slices.size(); ++i) {
    double mb = measure(f.slices[i]), ma = measure(out.family.slices[i]);
    newF = std::max(newF, ma);
    bool inK = std::find(K.begin(), K.end(), (int)i) != K.end();
    acc << f.times[i] << "," << (inK ? "K" : "notK") << "," << mb << "," << ma << "\n";
  }
  out.width_after = newF;
  out.claimed_bound = F - 0.5 * oneL + out.grid_tolerance;
  out.accounting_csv = acc.str();
  out.changed = true;
  if (out.width_after > out.claimed_bound + 1e-9)
    throw NumericError("width_drop_competitor: competitor misses the 1/(2L) drop");
  return out;
}

// ---- the refutation certifier ------------------------------------------------------------

struct AdversarySpec {
  std::vector<IsotopyGenerator> generators;  // parametric candidates, supported in the region
  bool use_descent = true;
  int descent_steps = 400;
  int trace_samples = 33;
  double step_factor = 0.2;
};

// A family of parametric shrink / translate / pinch adversaries supported
// inside the region.
inline AdversarySpec default_adversaries(const RegionSpec& region, int embed_dim) {
  AdversarySpec adv;
  Vec c = region.center;
  double R = region.outer;
  for (double depth : {0.25, 0.5, 0.9})
    adv.generators.push_back(radial_shrink_isotopy(c, R, depth,
                                                   "shrink" + std::to_string(depth)));
  for (int i = 0; i < embed_dim; ++i)
    for (double dist : {0.2 * R, 0.5 * R}) {
      Vec dir = Vec::Zero();
      dir[i] = 1.0;
      adv.generators.push_back(
          translate_isotopy(c, R, dir, dist, "translate" + std::to_string(i)));
      adv.generators.push_back(
          pinch_isotopy(c, R, dir, 0.7, "pinch" + std::to_string(i)));
    }
  return adv;
}

struct AmVerdict {
  bool refuted = false;
  std::string witness_id;
  std::vector<double> witness_trace;  // re-validated measures along the path
  std::vector<Slice> witness_path;
  long budget_spent = 0;
};

// Searches the adversary family for an isotopy that cuts the measure by eps
// without ever exceeding +eps/8 (discrete analogues of the two defining
// inequalities).  "not refuted" is a budget statement, not a proof.
inline AmVerdict am_certifier(const Slice& s, const Manifold* m, const RegionSpec& region,
                              double eps, const AdversarySpec& adv, long budget) {
  if (eps <= 0.0) throw DomainError("am_certifier: eps must be positive");
  AmVerdict v;
  double m0 = measure(s);
  auto project = [&](const Vec& y) { return m ? m->project(y) : y; };

  auto validate_path = [&](const std::vector<Slice>& path, const std::string& id) -> bool {
    double worst = -1e300;
    for (const Slice& st : path) worst = std::max(worst, measure(st));
    double fin = measure(path.back());
    if (worst <= m0 + eps / 8.0 + 1e-12 && fin <= m0 - eps + 1e-12) {
      v.refuted = true;
      v.witness_id = id;
      v.witness_path = path;
      v.witness_trace.clear();
      for (const Slice& st : path) v.witness_trace.push_back(measure(st));
      return true;
    }
    return false;
  };

  for (const IsotopyGenerator& g : adv.generators) {
    if (v.budget_spent >= budget) break;
    std::vector<Slice> path;
    bool excursion_ok = true;
    for (int q = 0; q <= adv.trace_samples; ++q) {
      double sp = double(q) / adv.trace_samples;
      Slice moved = map_slice(s, [&](const Vec& y) { return project(g.map(sp, y)); });
      ++v.budget_spent;
      path.push_back(std::move(moved));
      if (measure(path.back()) > m0 + eps / 8.0 + 1e-12) {
        excursion_ok = false;
        break;
      }
    }
    if (excursion_ok && validate_path(path, g.id)) return v;
    if (v.budget_spent >= budget) {
      v.budget_spent = budget;
      return v;
    }
  }

  if (adv.use_descent) {
    // region-constrained shrink flow, recorded as a path
    Slice cur = s;
    std::vector<Slice> path = {cur};
    double record_every = std::max(1, adv.descent_steps / adv.trace_samples);
    for (int step = 0; step < adv.descent_steps && v.budget_spent < budget; ++step) {
      std::vector<Vec> g = measure_gradient(cur);
      double vmax = 0.0;
      std::vector<Vec> vel(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        double b = bump1((m ? m->geodesic_distance(region.center, m->project(cur.verts[i]))
                            : (cur.verts[i] - region.center).norm()) /
                         region.outer);
        Vec w = -g[i] * b;
        if (m) w = m->tangent_projector(cur.verts[i]) * w;
        vel[i] = w;
        vmax = std::max(vmax, w.norm());
      }
      if (vmax < 1e-13) break;
      double feat = 1e300;
      for (double fz : local_feature_size(cur)) feat = std::min(feat, fz);
      double dt = adv.step_factor * feat / vmax;
      Slice trial = cur;
      for (std::size_t i = 0; i < trial.verts.size(); ++i)
        trial.verts[i] = project(cur.verts[i] + dt * vel[i]);
      ++v.budget_spent;
      if (measure(trial) > measure(cur) + 1e-15) break;  // descent stalled
      cur = std::move(trial);
      if (step % (int)record_every == 0) path.push_back(cur);
      if (measure(cur) <= m0 - eps) {
        path.push_back(cur);
        if (validate_path(path, "descent")) return v;
      }
    }
  }
  return v;
}

// ---- dichotomy bookkeeping ------------------------------------------------------------------

struct AmRecord {
  int slice_index = 0;
  Vec center = Vec::Zero();
  double radius = 0.0;
  bool refuted = false;
  long budget = 0;
};

struct AnnulusSchedule {
  bool consistent = true;
  std::string message;
  std::vector<int> surviving;                      // candidate slice indices
  std::optional<Vec> exceptional_center;
  std::vector<std::pair<double, double>> annuli;   // scheduled (inner, outer) radii
  std::vector<std::pair<Vec, double>> radius_fn;   // sample point -> working radius
};

// Replays the ball/annulus dichotomy on a verdict history: either all
// sampled balls are unrefuted (constant radius, all candidates survive) or
// a persistent exceptional center is excluded and annuli around it with
// shrinking inner radii are scheduled.
inline AnnulusSchedule am_annulus_schedule(int n_slices, const std::vector<AmRecord>& history,
                                           double r0) {
  if (history.empty()) throw DomainError("am_annulus_schedule: empty verdict history");
  AnnulusSchedule out;
  for (std::size_t i = 0; i < history.size(); ++i)
    for (std::size_t j = i + 1; j < history.size(); ++j) {
      const AmRecord &a = history[i], &b = history[j];
      if (a.slice_index == b.slice_index && a.radius == b.radius && a.budget == b.budget &&
          (a.center - b.center).norm() < 1e-12 && a.refuted != b.refuted) {
        out.consistent = false;
        out.message = "contradictory verdicts for one region at equal budget";
        return out;
      }
    }

  std::vector<const AmRecord*> refuted;
  for (const AmRecord& r : history)
    if (r.refuted) refuted.push_back(&r);

  if (refuted.empty()) {
    for (int i = 0; i < n_slices; ++i) out.surviving.push_back(i);
    for (const AmRecord& r : history) out.radius_fn.emplace_back(r.center, r0);
    return out;
  }

  // persistent exceptional center: the refuted center recurring most often
  Vec best_center = refuted[0]->center;
  int best_count = 0;
  for (const AmRecord* a : refuted) {
    int cnt = 0;
    for (const AmRecord* b : refuted)
      if ((a->center - b->center).norm() < 1e-9) ++cnt;
    if (cnt > best_count) {
      best_count = cnt;
      best_center = a->center;
    }
  }
  out.exceptional_center = best_center;
  for (int j = 2; j <= 9; ++j) out.annuli.emplace_back(r0 / j, r0);
  for (int i = 0; i < n_slices; ++i) {
    bool foreign_refutation = false;
    for (const AmRecord* r : refuted)
      if (r->slice_index == i && (r->center - best_center).norm() > 1e-9)
        foreign_refutation = true;
    if (!foreign_refutation) out.surviving.push_back(i);
  }
  for (const AmRecord& r : history) {
    double rad = (r.center - best_center).norm() < 1e-9 ? 0.0 : r0;
    out.radius_fn.emplace_back(r.center, rad);
  }
  return out;
}

}  // namespace mmv
