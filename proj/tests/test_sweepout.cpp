#include "mmv/sweepout.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace mmv;

TEST_CASE("level spheres of the 3-sphere have the closed-form areas", "[sweepout]") {
  Manifold s3 = Manifold::round_sphere3();
  SweepOut f = morse_sweepout(s3, "x4", 64, 1200);
  REQUIRE(f.slices.size() == 65);
  for (std::size_t i = 0; i < f.slices.size(); ++i) {
    if (f.time_is_singular((int)i)) continue;
    double c = f.levels[i];
    double expect = 4.0 * kPi * (1.0 - c * c);
    REQUIRE(measure(f.slices[i]) == Catch::Approx(expect).epsilon(0.02));
  }
  auto [arg, F] = max_slice(f);
  CHECK(std::abs(f.levels[arg]) <= 1.0 / 64 + 1e-12);  // the x4 = 0 equator
  CHECK(F == Catch::Approx(4.0 * kPi).epsilon(0.02));
}

TEST_CASE("latitude sweep-out of the 2-sphere", "[sweepout]") {
  Manifold s2 = Manifold::round_sphere2();
  SweepOut f = morse_sweepout(s2, "z", 64, 256);
  auto [arg, F] = max_slice(f);
  CHECK(F == Catch::Approx(2.0 * kPi).epsilon(0.005));
  CHECK(std::abs(f.levels[arg]) <= 1.0 / 64 + 1e-12);
  // poles are point slices, entered in T
  REQUIRE(f.singular_times.size() == 2);
  CHECK(f.slices.front().is_point_slice());
  CHECK(f.slices.back().is_point_slice());
}

TEST_CASE("torus height function has four degenerate slices", "[sweepout]") {
  Manifold t2 = Manifold::flat_torus2(1.0);
  SweepOut f = morse_sweepout(t2, "height", 64, 96);
  CHECK(f.singular_times.size() == 4);
  int marks = 0;
  for (const Slice& s : f.slices) marks += (int)s.singular_marks.size();
  CHECK(marks <= f.singular_budget);
  for (std::size_t i = 0; i < f.slices.size(); ++i)
    if (!f.time_is_singular((int)i)) CHECK(f.slices[i].singular_marks.empty());
  auto val = validate_sweepout(f);
  CHECK(val.ok);
}

TEST_CASE("continuity tolerances hold at K = 64 on every kind", "[sweepout]") {
  struct Case {
    Manifold m;
    std::string fn;
    int res;
  };
  std::vector<Case> cases = {{Manifold::round_sphere2(), "z", 128},
                             {Manifold::ellipsoid2(1.0, 1.0, 1.5), "z", 128},
                             {Manifold::flat_torus2(1.0), "height", 64},
                             {Manifold::round_sphere3(), "x4", 300},
                             {Manifold::flat_torus3(1.0), "height", 16}};
  for (const auto& c : cases) {
    SweepOut f = morse_sweepout(c.m, c.fn, 64, c.res);
    auto val = validate_sweepout(f);
    INFO(to_string(c.m.kind()) << ": " << val.message << " jump=" << val.worst_measure_jump
                               << "/" << f.delta_cont << " haus=" << val.worst_hausdorff_jump
                               << "/" << f.h_cont);
    REQUIRE(val.ok);
  }
}

TEST_CASE("max slice of degenerate families", "[sweepout]") {
  Manifold s2 = Manifold::round_sphere2();
  SweepOut f;
  f.manifold = s2;
  for (int i = 0; i <= 16; ++i) {
    f.times.push_back(i / 16.0);
    Slice s;
    s.dim = 1;
    s.verts.push_back(vec3(0, 0, 1));
    f.slices.push_back(s);
  }
  auto [arg, F] = max_slice(f);
  CHECK(F == 0.0);
  CHECK(arg == 0);
}

TEST_CASE("saturation moves", "[sweepout]") {
  Manifold s2 = Manifold::round_sphere2();
  SweepOut f = morse_sweepout(s2, "z", 32, 128);
  double F0 = max_slice(f).second;

  SECTION("identity plan leaves the family bit-for-bit") {
    FamilyDeformation id{[](double, const Vec& y) { return y; }, "identity"};
    SweepOut g = apply_saturation_move(f, id);
    for (std::size_t i = 0; i < f.slices.size(); ++i)
      for (std::size_t v = 0; v < f.slices[i].verts.size(); ++v)
        REQUIRE((g.slices[i].verts[v] - f.slices[i].verts[v]).norm() == 0.0);
    CHECK(g.singular_times == f.singular_times);
  }

  SECTION("support disjoint from all slices leaves the family unchanged") {
    // bump supported far off the sphere
    FamilyDeformation far_plan{[](double, const Vec& y) {
                                 double b = bump1((y - vec3(10, 0, 0)).norm() / 0.5);
                                 return Vec(y + b * vec3(0.1, 0, 0));
                               },
                               "far"};
    SweepOut g = apply_saturation_move(f, far_plan);
    for (std::size_t i = 0; i < f.slices.size(); ++i)
      for (std::size_t v = 0; v < f.slices[i].verts.size(); ++v)
        REQUIRE((g.slices[i].verts[v] - f.slices[i].verts[v]).norm() == 0.0);
  }

  SECTION("northward push on the equator band strictly decreases F") {
    FamilyDeformation push{[](double, const Vec& y) {
                             double b = bump1(y[2] / 0.3);
                             return Vec(y + 0.05 * b * vec3(0, 0, 1));
                           },
                           "north-push"};
    SweepOut g = apply_saturation_move(f, push);
    double F1 = max_slice(g).second;
    CHECK(F1 < F0);
    // recomputed max equals the reported one exactly (no caching drift)
    double m = 0.0;
    for (const Slice& s : g.slices) m = std::max(m, measure(s));
    CHECK(m == F1);
  }

  SECTION("a crushing map triggers the inversion guard") {
    FamilyDeformation crush{[](double, const Vec& y) {
                              return Vec(y - 1.8 * y[0] * vec3(1, 0, 0));
                            },
                            "crush"};
    CHECK_THROWS_AS(apply_saturation_move(f, crush), NumericError);
  }
}

TEST_CASE("isoperimetric lower bound with its bisection certificate", "[sweepout]") {
  Manifold s3 = Manifold::round_sphere3();
  SweepOut f = morse_sweepout(s3, "x4", 64, 1200);

  auto iso = isoperimetric_lower_bound(s3, f);
  // the bisecting slice is the equator
  CHECK(std::abs(f.levels[iso.bisect_index]) <= 1.0 / 32);
  CHECK(iso.bisect_measure == Catch::Approx(4.0 * kPi).epsilon(0.02));
  CHECK(iso.bound <= max_slice(f).second);
  CHECK(iso.bound > 0.0);

  // the Euclidean-constant value matches the closed-form expression
  double c_eu = euclidean_isoperimetric_constant(2);
  auto iso_eu = isoperimetric_lower_bound(s3, f, c_eu);
  double expect = std::pow(2.0 * kPi * kPi * 3.0 * std::sqrt(kPi), 2.0 / 3.0);
  CHECK(iso_eu.bound == Catch::Approx(expect).epsilon(1e-12));

  SECTION("degenerate family errors out") {
    SweepOut g = f;
    for (Slice& s : g.slices) {
      s.verts.clear();
      s.loops.clear();
      s.tris.clear();
      s.singular_marks.clear();
    }
    CHECK_THROWS_AS(isoperimetric_lower_bound(s3, g), DomainError);
  }
  SECTION("non-Morse provenance is rejected") {
    SweepOut g = f;
    g.provenance = "deformed";
    CHECK_THROWS_AS(isoperimetric_lower_bound(s3, g), DomainError);
  }
}

TEST_CASE("lower bound below the width on every Morse fixture", "[sweepout]") {
  struct Case {
    Manifold m;
    std::string fn;
    int res;
  };
  std::vector<Case> cases = {{Manifold::round_sphere2(), "z", 128},
                             {Manifold::ellipsoid2(1.0, 1.0, 1.5), "z", 128},
                             {Manifold::flat_torus2(1.0), "height", 64},
                             {Manifold::round_sphere3(), "x4", 300},
                             {Manifold::flat_torus3(1.0), "height", 16}};
  for (const auto& c : cases) {
    SweepOut f = morse_sweepout(c.m, c.fn, 64, c.res);
    auto iso = isoperimetric_lower_bound(c.m, f);
    INFO(to_string(c.m.kind()) << " bound=" << iso.bound << " F=" << max_slice(f).second);
    CHECK(iso.bound <= max_slice(f).second + 1e-9);
  }
}

TEST_CASE("sweep-out JSON round trip", "[sweepout]") {
  Manifold t2 = Manifold::flat_torus2(1.0);
  SweepOut f = morse_sweepout(t2, "height", 16, 48);
  SweepOut g = sweepout_from_json(sweepout_to_json(f));
  REQUIRE(g.slices.size() == f.slices.size());
  CHECK(g.singular_times == f.singular_times);
  CHECK(g.morse_name == f.morse_name);
  for (std::size_t i = 0; i < f.slices.size(); ++i) {
    REQUIRE(g.slices[i].verts.size() == f.slices[i].verts.size());
    CHECK(measure(g.slices[i]) == measure(f.slices[i]));
  }
}

TEST_CASE("morse sweep-out precondition errors", "[sweepout]") {
  Manifold s2 = Manifold::round_sphere2();
  CHECK_THROWS_AS(morse_sweepout(s2, "z", 8, 64), DomainError);       // K too small
  CHECK_THROWS_AS(morse_sweepout(s2, "nope", 64, 64), DomainError);   // unknown function
}
