#include "mmv/manifold.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace mmv;

namespace {
std::vector<Manifold> all_kinds() {
  return {Manifold::round_sphere2(), Manifold::ellipsoid2(1.0, 1.0, 1.5),
          Manifold::flat_torus2(1.0), Manifold::round_sphere3(), Manifold::flat_torus3(1.0)};
}
}  // namespace

TEST_CASE("geodesic distance closed forms", "[geometry]") {
  Manifold s2 = Manifold::round_sphere2();
  Vec north = vec3(0, 0, 1), south = vec3(0, 0, -1);
  CHECK(s2.geodesic_distance(north, south) == Catch::Approx(kPi).margin(1e-12));
  CHECK(s2.geodesic_distance(north, north) == Catch::Approx(0.0).margin(1e-12));

  Manifold t2 = Manifold::flat_torus2(1.0);
  Vec p = t2.torus2_embed(0.1, 0.1), q = t2.torus2_embed(0.9, 0.1);
  CHECK(t2.geodesic_distance(p, q) == Catch::Approx(0.2).margin(1e-10));

  // sphere distance = radius x central angle
  Manifold s2r = Manifold::round_sphere2(2.5);
  Vec a = vec3(2.5, 0, 0), b = vec3(0, 2.5, 0);
  CHECK(s2r.geodesic_distance(a, b) == Catch::Approx(2.5 * kPi / 2).margin(1e-10));

  CHECK_THROWS_AS(s2.geodesic_distance(vec3(0, 0, 2), south), DomainError);
}

TEST_CASE("distance symmetry and zero iff equal", "[geometry]") {
  Rng rng(11);
  for (const Manifold& m : all_kinds()) {
    for (int i = 0; i < 50; ++i) {
      Vec p = m.sample_uniform(rng), q = m.sample_uniform(rng);
      double d1 = m.geodesic_distance(p, q), d2 = m.geodesic_distance(q, p);
      CHECK(std::abs(d1 - d2) <= 1e-8 * (1.0 + d1));
      CHECK(d1 >= 0.0);
      CHECK(m.geodesic_distance(p, p) <= 1e-10);
    }
  }
}

TEST_CASE("triangle inequality on random triples", "[geometry]") {
  Rng rng(23);
  auto run = [&](const Manifold& m, int n) {
    for (int i = 0; i < n; ++i) {
      Vec a = m.sample_uniform(rng), b = m.sample_uniform(rng), c = m.sample_uniform(rng);
      double ab = m.geodesic_distance(a, b), bc = m.geodesic_distance(b, c),
             ac = m.geodesic_distance(a, c);
      REQUIRE(ac <= ab + bc + 1e-8);
    }
  };
  run(Manifold::round_sphere2(), 10000);
  run(Manifold::round_sphere3(), 10000);
  run(Manifold::flat_torus2(1.0), 10000);
  run(Manifold::flat_torus3(1.0), 10000);
  run(Manifold::ellipsoid2(1.0, 1.0, 1.5), 300);  // shooting log: slower
}

TEST_CASE("projection idempotent and tangent frames orthonormal", "[geometry]") {
  Rng rng(5);
  for (const Manifold& m : all_kinds()) {
    for (int i = 0; i < 10000; ++i) {
      Vec p = m.sample_uniform(rng);
      CHECK((m.project(p) - p).norm() <= 1e-12);
      if (i < 200) {
        auto bas = m.tangent_basis(p);
        REQUIRE((int)bas.size() == m.dim());
        // Gram matrix of the frame must be the identity (positive-definite
        // metric pullback) and the frame must be fixed by the projector
        for (std::size_t r = 0; r < bas.size(); ++r) {
          for (std::size_t c = 0; c < bas.size(); ++c)
            CHECK(std::abs(bas[r].dot(bas[c]) - (r == c ? 1.0 : 0.0)) <= 1e-10);
          CHECK((m.tangent_projector(p) * bas[r] - bas[r]).norm() <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("exponential map basics", "[geometry]") {
  Manifold s2 = Manifold::round_sphere2();
  Vec north = vec3(0, 0, 1);
  CHECK((s2.exp_map(north, Vec::Zero()) - north).norm() == 0.0);

  Vec v = vec3(kPi / 2, 0, 0);  // tangent at the pole
  Vec q = s2.exp_map(north, v);
  CHECK(std::abs(q[2]) <= 1e-12);  // lands on the equator
  CHECK(s2.geodesic_distance(north, q) == Catch::Approx(kPi / 2).margin(1e-10));

  CHECK_THROWS_AS(s2.exp_map(north, vec3(4.0, 0, 0)), RangeError);
  CHECK_THROWS_AS(s2.log_map(north, vec3(0, 0, -1)), RangeError);  // cut locus
}

TEST_CASE("exp/log round trips on all kinds", "[geometry]") {
  Rng rng(31);
  for (const Manifold& m : all_kinds()) {
    int n = m.kind() == ManifoldKind::Ellipsoid2 ? 25 : 300;
    for (int i = 0; i < n; ++i) {
      Vec x = m.sample_uniform(rng);
      auto bas = m.tangent_basis(x);
      Vec v = Vec::Zero();
      for (const Vec& b : bas) v += uniform(rng, -1.0, 1.0) * b;
      v *= uniform(rng, 0.05, 0.5) * m.inj_radius_bound() / std::max(v.norm(), 1e-12);
      Vec q = m.exp_map(x, v);
      Vec w = m.log_map(x, q);
      REQUIRE((w - v).norm() <= 1e-6 * (1.0 + v.norm()));
    }
  }
}

TEST_CASE("ellipsoid shooting against an independent integrator", "[geometry]") {
  Manifold e = Manifold::ellipsoid2(1.0, 1.0, 1.5);
  Rng rng(47);
  for (int i = 0; i < 20; ++i) {
    Vec x = e.sample_uniform(rng);
    auto bas = e.tangent_basis(x);
    double th = uniform(rng, 0, 2 * kPi);
    Vec v = std::cos(th) * bas[0] + std::sin(th) * bas[1];
    v *= 0.3;
    Vec q = e.exp_map(x, v);
    Vec q_oracle = oracles::ellipsoid_exp_rk4(1.0, 1.0, 1.5, x, v);
    REQUIRE((q - q_oracle).norm() <= 1e-6);
    Vec w = e.log_map(x, q);
    REQUIRE((w - v).norm() <= 1e-6);
  }
}

TEST_CASE("sub-level volumes on the round 3-sphere", "[geometry]") {
  Manifold s3 = Manifold::round_sphere3();
  double vol = 2.0 * kPi * kPi;

  auto full = s3.sublevel_volume("x4", 2.0, 200000);
  CHECK(std::abs(full.value - vol) <= 0.01 * vol);

  auto half = s3.sublevel_volume("x4", 0.0, 200000);
  CHECK(std::abs(half.value - vol / 2) <= 0.01 * vol);

  auto empty = s3.sublevel_volume("x4", -1.0, 200000);
  CHECK(empty.value == 0.0);

  auto strained = s3.sublevel_volume("x4", 0.0, 100, vol * 1e-6);
  CHECK_FALSE(strained.accuracy_ok);  // resolution too small for the requested error
  CHECK_THROWS_AS(s3.sublevel_volume("x4", 0.0, 4), DomainError);
}

TEST_CASE("manifold JSON descriptors round-trip", "[geometry]") {
  for (const Manifold& m : all_kinds()) {
    Manifold back = Manifold::from_json(m.to_json());
    CHECK(back.kind() == m.kind());
    CHECK(back.params() == m.params());
  }
  CHECK_THROWS_AS(
      Manifold::from_json(nlohmann::json{{"kind", "klein-bottle"}, {"params", {1.0}}}),
      DomainError);
  CHECK_THROWS_AS(Manifold::ellipsoid2(1.0, -1.0, 1.0), DomainError);
}
