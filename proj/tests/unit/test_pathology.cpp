#include <doctest.h>

#include <cmath>
#include <set>

#include "support.hpp"
#include "svr/pathology.hpp"

using namespace svr;

namespace {

// Twenty one-segment trees with leaves spread across a saturated lesion, so
// the removal weights differ in both depth and radius.
VesselForest star_forest(std::vector<Vec2>& leaf_xy) {
  VesselForest f;
  leaf_xy.clear();
  for (int i = 0; i < 20; ++i) {
    const double a = 2.0 * kPi * i / 20;
    const double rho = 0.02 + 0.006 * i;
    const Vec2 p{0.5 + rho * std::cos(a), 0.5 + rho * std::sin(a)};
    const NodeId root = f.add_root({p.x + 0.01, p.y, 0.04}, 0.01, VesselKind::arterial, Layer::superficial, {-1, 0, 0});
    f.add_child(root, {p.x, p.y, 0.04}, 0.002 + 0.0002 * (i % 7));
    leaf_xy.push_back(p);
  }
  return f;
}

}  // namespace

TEST_SUITE("pathology") {
  TEST_CASE("taper is linear") {
    CHECK(taper_radius(0.004, 0.002, 0.0) == 0.004);
    CHECK(taper_radius(0.004, 0.002, 1.0) == 0.002);
    CHECK(taper_radius(0.004, 0.002, 0.5) == doctest::Approx(0.003));
  }

  TEST_CASE("pruning weight") {
    PruningConfig cfg;
    CHECK(pruning_weight(0.5, 0.004, cfg) == doctest::Approx(0.25 * std::pow(0.004, -0.6)));
    CHECK(pruning_weight(1.0, 0.004, cfg) == 0.0);
  }

  TEST_CASE("weighted draw order puts zero weights last") {
    Rng rng(9);
    const std::vector<double> w{0.0, 2.0, 0.0, 1.0};
    const auto order = weighted_draw_order(w, rng);
    REQUIRE(order.size() == 4);
    CHECK(std::set<std::size_t>{order[0], order[1]} == std::set<std::size_t>{1, 3});
    CHECK(order[2] == 0);
    CHECK(order[3] == 2);
  }

  TEST_CASE("weighted sampling matches exact inclusion on a small set") {
    const std::vector<double> w{1.0, 2.0, 3.0, 0.5, 4.0, 1.5};
    const auto exact = test::exact_inclusion(w, 3);
    std::vector<int> hits(w.size(), 0);
    Rng rng(17);
    const int runs = 20000;
    for (int r = 0; r < runs; ++r)
      for (auto i : weighted_sample_without_replacement(w, 3, rng)) ++hits[i];
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(std::abs(hits[i] / double(runs) - exact[i]) < 0.02);
      total += exact[i];
    }
    CHECK(total == doctest::Approx(3.0));
  }

  TEST_CASE("pruning removes the configured share of eligible leaves") {
    std::vector<Vec2> xy;
    auto f = star_forest(xy);
    const DropoutField field({test::saturated_region({0.5, 0.5}, 0.5)});
    PruningConfig cfg;
    cfg.drop_fraction = 0.5;
    Rng rng(1);
    CHECK(prune_capillaries(f, field, cfg, 3.0, rng) == 10);
    CHECK(f.size() == 30);
  }

  TEST_CASE("full drop fraction removes every eligible leaf") {
    std::vector<Vec2> xy;
    auto f = star_forest(xy);
    const DropoutField field({test::saturated_region({0.5, 0.5}, 0.5)});
    PruningConfig cfg;
    cfg.drop_fraction = 1.0;
    Rng rng(2);
    const std::size_t eligible = std::count_if(xy.begin(), xy.end(), [&](Vec2 p) { return field.value(p) >= 0.35; });
    CHECK(prune_capillaries(f, field, cfg, 3.0, rng) == eligible);
    CHECK(f.size() == 40 - eligible);
  }

  TEST_CASE("pruning without lesions is a no-op") {
    std::vector<Vec2> xy;
    auto f = star_forest(xy);
    const auto before = f.serialize();
    Rng rng(3);
    CHECK(prune_capillaries(f, DropoutField{}, PruningConfig{}, 3.0, rng) == 0);
    CHECK(f.serialize() == before);
  }

  TEST_CASE("orphaned segments in the lesion retract") {
    auto f = test::comb_forest(1, 0.5);
    // Root at x=0.05, spine node at x=0.1, tooth above it; all inside.
    const DropoutField field({test::saturated_region({0.1, 0.5}, 0.3)});
    PruningConfig cfg;
    cfg.drop_fraction = 1.0;
    Rng rng(4);
    prune_capillaries(f, field, cfg, 3.0, rng);
    CHECK(f.size() == 1);
  }

  TEST_CASE("remodelling at the lesion centre") {
    VesselForest f;
    const NodeId root = f.add_root({0.4, 0.5, 0.04}, 0.01, VesselKind::arterial, Layer::superficial, {1, 0, 0});
    const NodeId tip = f.add_child(root, {0.5, 0.5, 0.04}, 0.004);
    const DropoutField field({test::saturated_region({0.5, 0.5}, 0.25)});
    REQUIRE(field.value({0.5, 0.5}) == doctest::Approx(1.0));
    PruningConfig cfg;
    cfg.elongation_min = cfg.elongation_max = 1.2;
    cfg.dilation_min = cfg.dilation_max = 1.2;
    FazGeometry faz;
    faz.center = {0.1, 0.1};
    faz.radius = 0.01;
    Rng rng(5);
    remodel_survivors(f, field, cfg, GrowthDomain{}, faz, 3.0, rng);
    CHECK(f.node(tip).position.x == doctest::Approx(0.52));
    CHECK(f.node(tip).position.y == doctest::Approx(0.5));
    CHECK(f.node(tip).radius == doctest::Approx(0.0048));
    CHECK(f.node(root).position.x == 0.4);
  }

  TEST_CASE("remodelling never moves into the FAZ") {
    VesselForest f;
    const NodeId root = f.add_root({0.4, 0.5, 0.04}, 0.01, VesselKind::arterial, Layer::superficial, {1, 0, 0});
    const NodeId tip = f.add_child(root, {0.5, 0.5, 0.04}, 0.004);
    const DropoutField field({test::saturated_region({0.5, 0.5}, 0.25)});
    PruningConfig cfg;
    cfg.elongation_min = cfg.elongation_max = 1.2;
    FazGeometry faz;
    faz.center = {0.52, 0.5};
    faz.radius = 0.005;
    Rng rng(6);
    remodel_survivors(f, field, cfg, GrowthDomain{}, faz, 3.0, rng);
    CHECK(f.node(tip).position.x == 0.5);
  }

  TEST_CASE("MA spawn probabilities") {
    MicroaneurysmConfig cfg;
    CHECK(ma_spawn_probability(0.0, 0.0, cfg) == doctest::Approx(0.03));
    // 0.03 * (1 + 15 * 0.95) * (1 + 0.5).
    CHECK(ma_spawn_probability(0.5, 0.95, cfg) == doctest::Approx(0.68625));
    CHECK(ma_spawn_probability(0.6, 0.99, cfg, 2.0) == 1.0);
  }

  TEST_CASE("MA hubs sit one offset beside their node") {
    // A long unbranched arterial chain per tree gives one trial per tree.
    VesselForest f;
    for (int t = 0; t < 12; ++t) {
      const double y = 0.3 + 0.03 * t;
      NodeId id = f.add_root({0.2, y, 0.04}, 0.01, VesselKind::arterial, Layer::superficial, {1, 0, 0});
      for (int k = 1; k <= 5; ++k) id = f.add_child(id, {0.2 + 0.01 * k, y, 0.04}, 0.003);
    }
    DropoutRegion region = test::circle_region({0.23, 0.45}, 0.5);
    region.exponent = 1.0;
    region.noise_gain = 0.0;
    const DropoutField field({region});
    MicroaneurysmConfig cfg;
    cfg.base_probability = 1.0;
    cfg.band_min = 0.0;
    cfg.band_max = 1.0;
    Rng rng(7);
    const auto records = spawn_microaneurysms(f, field, cfg, rng);
    CHECK(records.size() == 12);
    for (const auto& rec : records) {
      const Vec2 node = f.node(rec.parent).position.xy();
      CHECK(distance(rec.center, node) == doctest::Approx(0.0035));
      CHECK(rec.radius_mm >= 0.01);
      CHECK(rec.radius_mm <= 0.08);
      CHECK(rec.cluster.size() >= 3);
      CHECK(rec.cluster.size() <= 6);
    }
  }

  TEST_CASE("MA trials outside the band never fire") {
    VesselForest f;
    NodeId id = f.add_root({0.45, 0.5, 0.04}, 0.01, VesselKind::arterial, Layer::superficial, {1, 0, 0});
    for (int k = 1; k <= 5; ++k) id = f.add_child(id, {0.45 + 0.01 * k, 0.5, 0.04}, 0.003);
    const DropoutField field({test::saturated_region({0.5, 0.5}, 0.3)});
    MicroaneurysmConfig cfg;
    cfg.base_probability = 1.0;
    Rng rng(8);
    CHECK(spawn_microaneurysms(f, field, cfg, rng).empty());
  }

  TEST_CASE("trial node is the middle of each segment") {
    auto f = test::comb_forest(4, 0.5);
    // Spine nodes 1, 3 and 5 branch, so teeth 2, 4 and 6 are one-node
    // segments; the last spine node 7 and its tooth 8 form one run.
    const auto trials = ma_trial_nodes(f);
    CHECK(trials == std::vector<NodeId>{2, 4, 6, 8});
  }

  TEST_CASE("zero NV severity grows nothing") {
    auto f = test::comb_forest(4, 0.5);
    NeovascularConfig cfg;
    cfg.severity = 0.0;
    CHECK(nv_group_count(cfg) == 0);
    const DropoutField field({test::saturated_region({0.3, 0.5}, 0.3)});
    Rng rng(9);
    CHECK(grow_nv_tufts(f, field, FazGeometry{}, cfg, rng).empty());
    cfg.severity = 0.5;
    CHECK(nv_group_count(cfg) == 3);
  }

  TEST_CASE("tortuosity displacement is bounded and keeps topology") {
    VesselForest f;
    for (int t = 0; t < 20; ++t) {
      NodeId id = f.add_root({0.1, 0.05 * t, 0.04}, 0.01, VesselKind::arterial, Layer::superficial, {1, 0, 0});
      for (int k = 1; k < 80; ++k) id = f.add_child(id, {0.1 + 0.01 * k, 0.05 * t, 0.04}, 0.003);
    }
    const auto edges = f.edges();
    std::vector<Vec3> before;
    for (const auto& n : f.nodes()) before.push_back(n.position);
    const DropoutField field({test::circle_region({0.5, 0.5}, 0.45)});
    TortuosityConfig cfg;
    cfg.gain = 0.5;
    FazGeometry faz;
    faz.radius = 0.02;
    Rng rng(10);
    const auto moved = apply_tortuosity(f, field, cfg, 0.01, faz, rng);
    CHECK(moved > 50);
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, distance(f.nodes()[i].position, before[i]));
    CHECK(worst <= 0.00175);
    CHECK(worst > 0.001);
    CHECK(f.edges() == edges);
  }
}
