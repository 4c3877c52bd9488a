#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "svr/growth.hpp"

using namespace svr;

namespace {

// Brute-force cone membership via the arccosine of the normalized dot product.
bool cone_oracle(Vec3 tip, Vec3 dir, Vec3 p, double dist, double half) {
  const Vec3 d = p - tip;
  const double len = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
  if (len > dist) return false;
  if (len == 0.0) return false;
  const double dl = std::sqrt(dir.x * dir.x + dir.y * dir.y + dir.z * dir.z);
  const double c = (d.x * dir.x + d.y * dir.y + d.z * dir.z) / (len * dl);
  return std::acos(std::clamp(c, -1.0, 1.0)) <= half;
}

}  // namespace

TEST_SUITE("growth") {
  TEST_CASE("Murray combination") {
    // (0.03^3 + 0.04^3)^(1/3) = 91000e-9^(1/3).
    CHECK(murray_parent_radius(0.03, 0.04, 3.0) == doctest::Approx(0.0449794).epsilon(1e-6));
    CHECK(murray_parent_radius(0.01, 0.0, 3.0) == doctest::Approx(0.01));
    CHECK(murray_parent_radius(0.02, 0.02, 2.0) == doctest::Approx(0.02 * std::sqrt(2.0)));
    CHECK_THROWS_AS(murray_parent_radius(0.0, 0.0, 3.0), std::domain_error);
    CHECK_THROWS_AS(murray_parent_radius(-0.01, 0.01, 3.0), std::domain_error);
    CHECK_THROWS_AS(murray_parent_radius(0.01, 0.01, 0.0), std::domain_error);
  }

  TEST_CASE("perception cone matches the arccosine oracle") {
    Rng rng(11);
    const double half = 35.0 * kPi / 180.0;
    int inside = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const Vec3 tip{rng.uniform(), rng.uniform(), rng.uniform(0, 0.05)};
      const Vec3 dir{rng.normal(), rng.normal(), 0.2 * rng.normal()};
      std::vector<Vec3> pts;
      for (int k = 0; k < 50; ++k)
        pts.push_back(tip + Vec3{rng.uniform(-0.08, 0.08), rng.uniform(-0.08, 0.08), rng.uniform(-0.02, 0.02)});
      const auto got = perception_cone_filter(tip, dir, pts, 0.05, half);
      std::vector<Vec3> want;
      for (const auto& p : pts)
        if (cone_oracle(tip, dir, p, 0.05, half)) want.push_back(p);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
      inside += static_cast<int>(want.size());
    }
    CHECK(inside > 100);
  }

  TEST_CASE("growth direction blends unit vectors") {
    const Vec3 d = growth_direction({2, 0, 0}, {0, 5, 0}, 0.5);
    CHECK(d.x == doctest::Approx(std::sqrt(0.5)));
    CHECK(d.y == doctest::Approx(std::sqrt(0.5)));
    CHECK_THROWS_AS(growth_direction({1, 0, 0}, {-1, 0, 0}, 0.5), DegenerateDirection);
  }

  TEST_CASE("FAZ centre shift is bounded") {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
      const Vec2 c = sample_faz_center(0.08, 0.05, rng);
      CHECK(distance(c, Vec2{0.5, 0.5}) <= 0.05 + 1e-12);
    }
  }

  TEST_CASE("growth is deterministic and obeys the branching law") {
    GrowthDomain domain;
    GrowthConfig cfg;
    cfg.iterations_per_layer = 30;
    FazGeometry faz;
    Rng a(42), b(42);
    const auto fa = grow_forest(domain, cfg, faz, a);
    const auto fb = grow_forest(domain, cfg, faz, b);
    CHECK(fa.serialize() == fb.serialize());
    REQUIRE(fa.size() > 20);
    int bifurcations = 0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
      const auto id = static_cast<NodeId>(i);
      const auto kids = fa.growth_children(id);
      CHECK(domain.contains(fa.node(id).position));
      if (kids.size() != 2) continue;
      ++bifurcations;
      const double want = murray_parent_radius(fa.node(kids[0]).radius, fa.node(kids[1]).radius, cfg.kappa);
      CHECK(std::abs(fa.node(id).radius - want) <= 1e-6 * want);
    }
    CHECK(bifurcations > 0);
  }

  TEST_CASE("zero iterations leaves only roots") {
    GrowthDomain domain;
    GrowthConfig cfg;
    cfg.iterations_per_layer = 0;
    Rng rng(1);
    const auto f = grow_forest(domain, cfg, FazGeometry{}, rng);
    for (const auto& n : f.nodes()) CHECK(n.is_root());
  }

  TEST_CASE("zero attraction points is a configuration error") {
    GrowthConfig cfg;
    cfg.attraction_points_per_iteration = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    Rng rng(1);
    CHECK_THROWS_AS(grow_forest(GrowthDomain{}, cfg, FazGeometry{}, rng), ConfigError);
  }
}
