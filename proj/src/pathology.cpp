#include "svr/pathology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace svr {

namespace {

bool in_unit_square(Vec2 p) { return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0; }

Vec2 unit_or_zero(Vec2 v) {
  const double len = norm(v);
  return len > 1e-12 ? v * (1.0 / len) : Vec2{};
}

}  // namespace

void PruningConfig::validate() const {
  if (!(regression_threshold > 0.0 && regression_threshold < 1.0))
    throw ConfigError("regression threshold must lie in (0, 1)");
  if (!(core_bias > 0.0)) throw ConfigError("pruning core bias must be positive");
  if (!(radius_bias >= 0.3 && radius_bias <= 1.0))
    throw ConfigError("pruning radius bias must lie in [0.3, 1]");
  if (!(drop_fraction >= 0.0 && drop_fraction <= 1.0))
    throw ConfigError("drop fraction must lie in [0, 1]");
  if (!(elongation_min >= 1.0 && elongation_max >= elongation_min))
    throw ConfigError("elongation range must satisfy 1 <= min <= max");
  if (!(dilation_min >= 1.0 && dilation_max >= 1.0))
    throw ConfigError("dilation bounds must be at least 1");
}

void MicroaneurysmConfig::validate() const {
  if (!(base_probability >= 0.0 && base_probability <= 1.0))
    throw ConfigError("MA base probability must lie in [0, 1]");
  if (!(severity_coupling >= 0.0 && local_coupling >= 0.0))
    throw ConfigError("MA couplings must be non-negative");
  if (!(band_min >= 0.0 && band_min <= band_max && band_max <= 1.0))
    throw ConfigError("MA band must satisfy 0 <= min <= max <= 1");
  if (!(radius_min_mm > 0.0 && radius_min_mm <= radius_max_mm))
    throw ConfigError("MA radius range must be positive and ordered");
  if (!(length_factor > 0.0 && step > 0.0 && mm_per_unit > 0.0))
    throw ConfigError("MA length factor, step and scale must be positive");
  if (!(reference_area > 0.0)) throw ConfigError("MA reference area must be positive");
  if (!(cluster_min >= 0 && cluster_min <= cluster_max))
    throw ConfigError("MA cluster size range must be ordered");
}

void NeovascularConfig::validate() const {
  if (!(severity >= 0.0 && severity <= 1.0)) throw ConfigError("NV severity must lie in [0, 1]");
  if (!(footprint > 0.0)) throw ConfigError("NV footprint must be positive");
  if (!(length_min >= 1 && length_min <= length_max))
    throw ConfigError("NV sprout length range must satisfy 1 <= min <= max");
  if (!(containment >= 0.0 && containment < 1.0)) throw ConfigError("NV containment must lie in [0, 1)");
  if (!(start_ratio > 0.0 && end_ratio > 0.0 && end_ratio < 1.0))
    throw ConfigError("NV radius ratios must be positive with end ratio below 1");
  if (max_attempts < 1) throw ConfigError("NV attempt budget must be positive");
}

void TortuosityConfig::validate() const {
  if (!(gain >= 0.0 && gain <= 1.0)) throw ConfigError("tortuosity gain must lie in [0, 1]");
  if (!(band_min >= 0.0 && band_min < band_max && band_max <= 1.0))
    throw ConfigError("tortuosity band must satisfy 0 <= min < max <= 1");
}

double taper_radius(double r_start, double r_end, double tau) {
  return (1.0 - tau) * r_start + tau * r_end;
}

double NeovascularTuft::radius_at(double tau) const { return taper_radius(radius_start, radius_end, tau); }

std::vector<std::size_t> weighted_draw_order(std::span<const double> weights, Rng& rng) {
  std::vector<std::pair<double, std::size_t>> keyed;
  std::vector<std::size_t> zero;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      keyed.emplace_back(std::log(u) / weights[i], i);
    } else {
      zero.push_back(i);
    }
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::size_t> order;
  order.reserve(weights.size());
  for (const auto& [key, i] : keyed) order.push_back(i);
  order.insert(order.end(), zero.begin(), zero.end());
  return order;
}

std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights,
                                                             std::size_t count, Rng& rng) {
  auto order = weighted_draw_order(weights, rng);
  order.resize(std::min(count, order.size()));
  return order;
}

double pruning_weight(double dropout, double radius, const PruningConfig& config) {
  return std::pow(std::max(0.0, 1.0 - dropout), config.core_bias) *
         std::pow(radius, -config.radius_bias);
}

std::size_t prune_capillaries(VesselForest& forest, const DropoutField& field,
                              const PruningConfig& config, double kappa, Rng& rng) {
  config.validate();
  if (field.empty()) return 0;

  std::vector<NodeId> eligible;
  std::vector<double> weights;
  for (NodeId leaf : forest.growth_leaves()) {
    const auto& n = forest.node(leaf);
    if (n.child_count() != 0) continue;
    const double c = field.value(n.position.xy());
    if (c < config.regression_threshold) continue;
    eligible.push_back(leaf);
    weights.push_back(pruning_weight(c, n.radius, config));
  }
  const auto target = std::min(
      eligible.size(),
      static_cast<std::size_t>(std::floor(config.drop_fraction * static_cast<double>(eligible.size()))));
  if (target == 0) return 0;

  const auto chosen = weighted_sample_without_replacement(weights, target, rng);
  std::vector<char> marked(forest.size(), 0);
  std::vector<NodeId> doomed;
  for (std::size_t idx : chosen) {
    marked[static_cast<std::size_t>(eligible[idx])] = 1;
    doomed.push_back(eligible[idx]);
  }
  // Segments left without any surviving descendant retract as well, as long
  // as they sit in regressing tissue. Children precede parents in post-order,
  // so one pass carries the retraction up to the first surviving branch.
  for (NodeId id : forest.post_order()) {
    const auto& n = forest.node(id);
    if (marked[static_cast<std::size_t>(id)] || n.is_root() || n.origin != NodeOrigin::growth || n.is_leaf())
      continue;
    const bool orphaned = std::all_of(n.children.begin(), n.children.end(), [&](NodeId c) {
      return c == kNoNode || marked[static_cast<std::size_t>(c)];
    });
    if (!orphaned || field.value(n.position.xy()) < config.regression_threshold) continue;
    marked[static_cast<std::size_t>(id)] = 1;
    doomed.push_back(id);
  }
  forest.remove_nodes(doomed);
  forest.recompute_radii(kappa);
  return target;
}

void remodel_survivors(VesselForest& forest, const DropoutField& field,
                       const PruningConfig& config, const GrowthDomain& domain,
                       const FazGeometry& faz, double kappa, Rng& rng) {
  config.validate();
  if (field.empty()) return;
  std::vector<Vec3> original(forest.size());
  for (std::size_t i = 0; i < forest.size(); ++i) original[i] = forest.nodes()[i].position;

  for (std::size_t i = 0; i < forest.size(); ++i) {
    auto& n = forest.node(static_cast<NodeId>(i));
    if (n.is_root() || n.origin != NodeOrigin::growth) continue;
    const double c = field.value(original[i].xy());
    if (c <= 0.0) continue;
    const double e = rng.uniform(config.elongation_min, config.elongation_max);
    const Vec3 xp = original[static_cast<std::size_t>(n.parent)];
    const Vec3 moved = xp + (original[i] - xp) * (1.0 + (e - 1.0) * c);
    if (domain.contains(moved) && !faz.contains(moved.xy())) n.position = moved;
    n.radius *= config.dilation_min + (config.dilation_max - config.dilation_min) * c;
  }
  forest.restore_murray(kappa);
}

double ma_area_factor(const DropoutField& field, const MicroaneurysmConfig& config) {
  if (field.empty()) return 1.0;
  double largest = 0.0;
  for (const auto& r : field.regions()) largest = std::max(largest, region_area(r));
  return std::clamp(largest / config.reference_area, 0.5, 2.0);
}

double ma_spawn_probability(double dropout, double max_strength, const MicroaneurysmConfig& config,
                            double area_factor) {
  const double p = config.base_probability * (1.0 + config.severity_coupling * max_strength) *
                   (1.0 + config.local_coupling * dropout) * area_factor;
  return std::min(1.0, p);
}

std::vector<NodeId> ma_trial_nodes(const VesselForest& forest) {
  std::vector<NodeId> trials;
  const auto count = static_cast<NodeId>(forest.size());
  for (NodeId start = 0; start < count; ++start) {
    const auto& n = forest.node(start);
    if (n.is_root() || n.origin != NodeOrigin::growth || forest.kind_of(start) != VesselKind::arterial) continue;
    // A segment starts right below a root or a bifurcation.
    const NodeId parent = n.parent;
    if (!forest.node(parent).is_root() && forest.growth_children(parent).size() != 2) continue;
    std::vector<NodeId> chain;
    for (NodeId id = start;;) {
      const auto kids = forest.growth_children(id);
      if (forest.node(id).child_count() < 2) chain.push_back(id);
      if (kids.size() != 1) break;
      id = kids.front();
    }
    if (!chain.empty()) trials.push_back(chain[chain.size() / 2]);
  }
  return trials;
}

std::vector<MicroaneurysmRecord> spawn_microaneurysms(VesselForest& forest,
                                                      const DropoutField& field,
                                                      const MicroaneurysmConfig& config, Rng& rng) {
  config.validate();
  std::vector<MicroaneurysmRecord> records;
  if (field.empty()) return records;
  const double s_max = field.max_strength();
  const double area_factor = ma_area_factor(field, config);
  for (NodeId id : ma_trial_nodes(forest)) {
    const auto& n = forest.node(id);
    const double c = field.value(n.position.xy());
    if (c < config.band_min || c > config.band_max) continue;
    const Vec2 u = unit_or_zero(n.position.xy() - forest.node(n.parent).position.xy());
    if (u == Vec2{}) continue;
    if (!rng.bernoulli(ma_spawn_probability(c, s_max, config, area_factor))) continue;

    const double offset = config.length_factor * config.step;
    Vec2 center = n.position.xy() + perpendicular(u) * offset;
    if (!in_unit_square(center)) center = n.position.xy() - perpendicular(u) * offset;
    if (!in_unit_square(center)) continue;

    MicroaneurysmRecord rec;
    rec.center = center;
    rec.radius_mm = rng.uniform(config.radius_min_mm, config.radius_max_mm);
    rec.parent = id;
    const double r_norm = rec.radius_mm / config.mm_per_unit;
    const double z = n.position.z;
    const NodeId hub = forest.add_child(id, {center.x, center.y, z}, r_norm, NodeOrigin::microaneurysm);
    rec.cluster.push_back(hub);
    rec.cluster_positions.push_back(center);
    rec.cluster_radii.push_back(r_norm);

    const auto extra = rng.uniform_int(config.cluster_min, config.cluster_max);
    for (std::int64_t k = 0; k < extra; ++k) {
      Vec2 p = center;
      for (int attempt = 0; attempt < 8; ++attempt) {
        const Vec2 candidate = center + rng.in_disk(0.5 * r_norm);
        if (in_unit_square(candidate)) {
          p = candidate;
          break;
        }
      }
      const double r = r_norm * rng.uniform(0.5, 0.9);
      // Binary-heap layout keeps the cluster a binary subtree of the hub.
      const NodeId parent = k < 2 ? hub : rec.cluster[static_cast<std::size_t>((k - 2) / 2 + 1)];
      rec.cluster.push_back(forest.add_child(parent, {p.x, p.y, z}, r, NodeOrigin::microaneurysm));
      rec.cluster_positions.push_back(p);
      rec.cluster_radii.push_back(r);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

int nv_group_count(const NeovascularConfig& config) {
  if (config.severity <= 0.0) return 0;
  return std::max(0, static_cast<int>(std::lround(config.group_base + config.group_gain * config.severity)));
}

namespace {

struct SproutContext {
  const DropoutField& field;
  const FazGeometry& faz;
  const NeovascularConfig& config;
  double swirl_phase = 0.0;
};

bool sprout_point_ok(const SproutContext& ctx, Vec2 p) {
  return in_unit_square(p) && distance(p, ctx.faz.center) > ctx.faz.radius &&
         ctx.field.value(p) > ctx.config.containment;
}

/// Grows up to `steps` points from `start`; stops early when no admissible
/// step is found within the attempt budget.
std::vector<Vec2> grow_sprout(const SproutContext& ctx, Vec2 start, Vec2 heading, int steps,
                              double step_length, Rng& rng) {
  std::vector<Vec2> points{start};
  Vec2 previous = heading;
  for (int t = 0; t < steps; ++t) {
    const Vec2 p = points.back();
    bool advanced = false;
    for (int attempt = 0; attempt < ctx.config.max_attempts && !advanced; ++attempt) {
      Vec2 radial = unit_or_zero(p - ctx.field.nearest_center(p));
      if (radial == Vec2{}) radial = previous;
      const Vec2 swirl = perpendicular(radial) * std::sin(0.9 * t + ctx.swirl_phase);
      const Vec2 jitter{ctx.config.jitter_std * rng.normal(), ctx.config.jitter_std * rng.normal()};
      const Vec2 v = unit_or_zero(previous * ctx.config.persistence_weight +
                                  radial * ctx.config.radial_weight +
                                  swirl * ctx.config.swirl_weight + jitter);
      if (v == Vec2{}) continue;
      const Vec2 q = p + v * step_length;
      if (!sprout_point_ok(ctx, q)) continue;
      points.push_back(q);
      previous = v;
      advanced = true;
    }
    if (!advanced) break;
  }
  return points;
}

Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

}  // namespace

std::vector<NeovascularTuft> grow_nv_tufts(VesselForest& forest, const DropoutField& field,
                                           const FazGeometry& faz, const NeovascularConfig& config,
                                           Rng& rng) {
  config.validate();
  std::vector<NeovascularTuft> tufts;
  const int groups = nv_group_count(config);
  if (groups == 0 || field.empty()) return tufts;

  std::vector<NodeId> tips;
  std::vector<double> weights;
  for (NodeId id : forest.growth_leaves()) {
    const auto& n = forest.node(id);
    if (forest.kind_of(id) != VesselKind::arterial || n.child_count() >= 2) continue;
    const Vec2 x = n.position.xy();
    const double c = field.value(x);
    if (c <= config.containment || distance(x, faz.center) <= faz.radius) continue;
    const double faz_margin = std::clamp((distance(x, faz.center) - faz.radius) / faz.radius, 0.05, 1.0);
    tips.push_back(id);
    weights.push_back(c * faz_margin);
  }
  if (tips.empty()) return tufts;

  const double side_probability = std::min(0.9, 0.15 + 0.6 * config.severity);
  for (std::size_t pick : weighted_draw_order(weights, rng)) {
    if (static_cast<int>(tufts.size()) >= groups) break;
    const NodeId tip = tips[pick];
    const auto& tip_node = forest.node(tip);
    const Vec2 start = tip_node.position.xy();
    Vec2 heading = unit_or_zero(start - forest.node(tip_node.parent).position.xy());
    if (heading == Vec2{}) heading = unit_or_zero(start - field.nearest_center(start));
    if (heading == Vec2{}) heading = {1.0, 0.0};

    const int span = config.length_max - config.length_min;
    const int target = std::clamp(
        config.length_min + static_cast<int>(std::lround(config.severity * span + rng.uniform(-1.0, 1.0))),
        config.length_min, config.length_max);
    const double step_length = config.footprint / target;
    SproutContext ctx{field, faz, config, rng.uniform(0.0, 2.0 * kPi)};
    auto main = grow_sprout(ctx, start, heading, target, step_length, rng);
    if (static_cast<int>(main.size()) - 1 < config.length_min) continue;

    NeovascularTuft tuft;
    tuft.origin = tip;
    tuft.radius_start = config.start_ratio * tip_node.radius;
    tuft.radius_end = config.end_ratio * tuft.radius_start;
    tuft.severity = config.severity;
    tuft.step_length = step_length;
    tuft.main = std::move(main);
    const int steps = tuft.steps();
    const double z = tip_node.position.z;

    std::vector<NodeId> chain{tip};
    for (int t = 1; t <= steps; ++t) {
      const Vec2 p = tuft.main[static_cast<std::size_t>(t)];
      chain.push_back(forest.add_child(chain.back(), {p.x, p.y, z},
                                       tuft.radius_at(static_cast<double>(t) / steps),
                                       NodeOrigin::neovascular));
    }
    for (int t = 1; t < steps; ++t) {
      if (!rng.bernoulli(side_probability)) continue;
      const Vec2 anchor = tuft.main[static_cast<std::size_t>(t)];
      const Vec2 along = unit_or_zero(tuft.main[static_cast<std::size_t>(t + 1)] - anchor);
      const double turn = (rng.bernoulli(0.5) ? 1.0 : -1.0) * kPi / 3.0;
      const int side_steps = static_cast<int>(rng.uniform_int(1, steps - 1));
      auto side = grow_sprout(ctx, anchor, rotate(along, turn), side_steps, step_length, rng);
      if (side.size() < 2) continue;
      const double r0 = tuft.radius_at(static_cast<double>(t) / steps);
      const int n_side = static_cast<int>(side.size()) - 1;
      NodeId parent = chain[static_cast<std::size_t>(t)];
      for (int s = 1; s <= n_side; ++s) {
        const Vec2 p = side[static_cast<std::size_t>(s)];
        parent = forest.add_child(parent, {p.x, p.y, z},
                                  taper_radius(r0, tuft.radius_end, static_cast<double>(s) / n_side),
                                  NodeOrigin::neovascular);
      }
      tuft.sides.push_back(std::move(side));
      tuft.side_anchors.push_back(t);
    }
    tufts.push_back(std::move(tuft));
  }
  return tufts;
}

std::size_t apply_tortuosity(VesselForest& forest, const DropoutField& field,
                             const TortuosityConfig& config, double step, const FazGeometry& faz,
                             Rng& rng) {
  config.validate();
  const double amplitude = 0.35 * config.gain * step;
  if (amplitude <= 0.0 || field.empty()) return 0;
  std::vector<Vec3> original(forest.size());
  for (std::size_t i = 0; i < forest.size(); ++i) original[i] = forest.nodes()[i].position;

  std::size_t moved = 0;
  for (std::size_t i = 0; i < forest.size(); ++i) {
    auto& n = forest.node(static_cast<NodeId>(i));
    if (n.is_root() || n.origin != NodeOrigin::growth) continue;
    if (forest.kind_of(static_cast<NodeId>(i)) != VesselKind::arterial) continue;
    const double c = field.value(original[i].xy());
    if (c < config.band_min || c > config.band_max) continue;
    const Vec2 u = unit_or_zero(original[i].xy() - original[static_cast<std::size_t>(n.parent)].xy());
    if (u == Vec2{}) continue;
    const double eps = rng.uniform(-amplitude, amplitude);
    const Vec2 target = original[i].xy() + perpendicular(u) * eps;
    const Vec2 clipped{std::clamp(target.x, 0.0, 1.0), std::clamp(target.y, 0.0, 1.0)};
    if (faz.contains(clipped) || clipped == original[i].xy()) continue;
    n.position.x = clipped.x;
    n.position.y = clipped.y;
    ++moved;
  }
  return moved;
}

}  // namespace svr
