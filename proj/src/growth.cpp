#include "svr/growth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace svr {

void GrowthDomain::validate() const {
  if (!(depth > 0.0)) throw ConfigError("growth domain depth must be positive");
  if (!(mm_per_unit > 0.0)) throw ConfigError("physical scale must be positive");
  if (!(layer_fraction > 0.0 && layer_fraction <= 0.5))
    throw ConfigError("layer fraction must lie in (0, 0.5]");
}

void GrowthConfig::validate() const {
  if (!(perception_distance > 0.0)) throw ConfigError("perception distance must be positive");
  if (!(perception_half_angle > 0.0 && perception_half_angle < kPi / 2))
    throw ConfigError("perception half-angle must lie in (0, pi/2)");
  if (!(step > 0.0)) throw ConfigError("growth step must be positive");
  if (!(kappa > 0.0)) throw ConfigError("bifurcation exponent must be positive");
  if (!(direction_weight >= 0.0 && direction_weight <= 1.0))
    throw ConfigError("direction weight must lie in [0, 1]");
  if (!(kill_factor > 0.0 && kill_factor < 1.0)) throw ConfigError("kill factor must lie in (0, 1)");
  if (attraction_points_per_iteration <= 0)
    throw ConfigError("attraction points per iteration must be positive");
  if (iterations_per_layer < 0) throw ConfigError("iteration budget must be non-negative");
  if (!(terminal_radius > 0.0)) throw ConfigError("terminal radius must be positive");
  if (!(sink_source_ratio > 0.0)) throw ConfigError("sink/source ratio must be positive");
  if (arterial_root_angles.empty() || venous_root_angles.empty())
    throw ConfigError("at least one arterial and one venous root are required");
  if (deep_seeds_per_kind < 0) throw ConfigError("deep seed count must be non-negative");
}

double murray_parent_radius(double r1, double r2, double kappa) {
  if (!(kappa > 0.0)) throw std::domain_error("Murray exponent must be positive");
  if (r1 < 0.0 || r2 < 0.0) throw std::domain_error("radii must be non-negative");
  if (r1 == 0.0 && r2 == 0.0) throw std::domain_error("at least one child radius must be positive");
  if (r2 == 0.0) return r1;
  if (r1 == 0.0) return r2;
  return std::pow(std::pow(r1, kappa) + std::pow(r2, kappa), 1.0 / kappa);
}

Vec2 sample_faz_center(double jitter_radius, double max_shift, Rng& rng) {
  const Vec2 center{0.5, 0.5};
  if (jitter_radius <= 0.0) return center;
  Vec2 shift = rng.in_disk(jitter_radius);
  const double len = norm(shift);
  if (len > max_shift) shift = len > 0.0 ? shift * (max_shift / len) : Vec2{};
  return center + shift;
}

bool in_perception_cone(Vec3 tip, Vec3 direction, Vec3 point, double distance_limit,
                        double half_angle) {
  const Vec3 v = point - tip;
  const double len = norm(v);
  const double dir_len = norm(direction);
  if (len <= 0.0 || dir_len <= 0.0 || len > distance_limit * (1.0 + 1e-12)) return false;
  return dot(v, direction) >= len * dir_len * (std::cos(half_angle) - 1e-12);
}

std::vector<Vec3> perception_cone_filter(Vec3 tip, Vec3 direction, std::span<const Vec3> points,
                                         double distance_limit, double half_angle) {
  std::vector<Vec3> out;
  for (const Vec3& p : points)
    if (in_perception_cone(tip, direction, p, distance_limit, half_angle)) out.push_back(p);
  return out;
}

Vec3 growth_direction(Vec3 attraction, Vec3 branching, double weight) {
  const double la = norm(attraction);
  const double lb = norm(branching);
  if (la <= 0.0 || lb <= 0.0) throw std::invalid_argument("growth direction inputs must be non-zero");
  const Vec3 blended = attraction * (weight / la) + branching * ((1.0 - weight) / lb);
  const double len = norm(blended);
  if (len < 1e-12) throw DegenerateDirection("attraction and branching directions cancel");
  return blended * (1.0 / len);
}

namespace {

/// Uniform bucket grid over the unit square, indexed by (x, y) only.
class BucketGrid {
 public:
  explicit BucketGrid(double cell)
      : cells_per_side_(std::max(1, static_cast<int>(std::floor(1.0 / cell)))),
        buckets_(static_cast<std::size_t>(cells_per_side_ * cells_per_side_)) {}

  void insert(int id, Vec2 p) { buckets_[index(cell_of(p.x), cell_of(p.y))].push_back(id); }

  template <typename F>
  void for_each_near(Vec2 p, F&& f) const {
    const int cx = cell_of(p.x);
    const int cy = cell_of(p.y);
    for (int y = std::max(0, cy - 1); y <= std::min(cells_per_side_ - 1, cy + 1); ++y)
      for (int x = std::max(0, cx - 1); x <= std::min(cells_per_side_ - 1, cx + 1); ++x)
        for (int id : buckets_[index(x, y)]) f(id);
  }

 private:
  int cell_of(double v) const {
    return std::clamp(static_cast<int>(v * cells_per_side_), 0, cells_per_side_ - 1);
  }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y * cells_per_side_ + x); }

  int cells_per_side_;
  std::vector<std::vector<int>> buckets_;
};

struct AttractionPoint {
  Vec3 position;
  NodeId target = kNoNode;
  double target_distance = std::numeric_limits<double>::infinity();
  bool alive = true;
};

/// One space-colonization population (oxygen sinks or CO2 sources) feeding
/// the trees of a single vessel kind within one layer.
class Colonizer {
 public:
  Colonizer(VesselForest& forest, const GrowthDomain& domain, const GrowthConfig& config,
            const FazGeometry& faz, VesselKind kind, Layer layer)
      : forest_(forest),
        domain_(domain),
        config_(config),
        faz_(faz),
        kind_(kind),
        layer_(layer),
        nodes_(config.perception_distance),
        points_(config.perception_distance) {
    for (std::size_t i = 0; i < forest_.size(); ++i) {
      const auto id = static_cast<NodeId>(i);
      if (owns(id)) nodes_.insert(id, forest_.node(id).position.xy());
    }
  }

  void add_points(int count, Rng& rng) {
    const double z_lo = domain_.layer_min_z(layer_);
    const double z_hi = domain_.layer_max_z(layer_);
    for (int i = 0; i < count; ++i) {
      Vec3 p;
      do {
        p = {rng.uniform(), rng.uniform(), rng.uniform(z_lo, z_hi)};
      } while (distance(p.xy(), faz_.center) <= faz_.radius);
      AttractionPoint ap{p};
      rescan(ap);
      if (!ap.alive) continue;
      const int idx = static_cast<int>(pool_.size());
      pool_.push_back(ap);
      points_.insert(idx, p.xy());
    }
  }

  /// One growth iteration; returns the number of nodes added.
  int grow() {
    std::vector<Vec3> pull(forest_.size());
    std::vector<char> seen(forest_.size(), 0);
    std::vector<NodeId> pulled;
    for (const auto& ap : pool_) {
      if (!ap.alive || ap.target == kNoNode) continue;
      const auto t = static_cast<std::size_t>(ap.target);
      if (!seen[t]) {
        seen[t] = 1;
        pulled.push_back(ap.target);
      }
      const Vec3 v = ap.position - forest_.node(ap.target).position;
      pull[t] += v * (1.0 / norm(v));
    }
    std::sort(pulled.begin(), pulled.end());

    std::vector<NodeId> added;
    std::vector<NodeId> filled;
    for (NodeId id : pulled) {
      const Vec3 mean = pull[static_cast<std::size_t>(id)];
      if (norm(mean) < 1e-12) continue;
      Vec3 dir;
      try {
        dir = growth_direction(mean, forest_.direction(id), config_.direction_weight);
      } catch (const DegenerateDirection&) {
        dir = mean * (1.0 / norm(mean));
      }
      const Vec3 pos = forest_.node(id).position + dir * config_.step;
      if (!domain_.contains(pos) || faz_.contains(pos.xy())) continue;
      const NodeId child = forest_.add_child(id, pos, config_.terminal_radius);
      if (!domain_.contains(forest_.node(child).position))
        throw std::logic_error("growth step left the domain");
      nodes_.insert(child, pos.xy());
      added.push_back(child);
      if (forest_.node(id).child_count() == 2) filled.push_back(id);
    }

    for (NodeId child : added) {
      const Vec3 c = forest_.node(child).position;
      const Vec3 dir = forest_.direction(child);
      points_.for_each_near(c.xy(), [&](int idx) {
        auto& ap = pool_[static_cast<std::size_t>(idx)];
        if (!ap.alive) return;
        const double d = distance(ap.position, c);
        if (d < kill_distance()) {
          ap.alive = false;
          return;
        }
        if (d < ap.target_distance &&
            in_perception_cone(c, dir, ap.position, config_.perception_distance,
                               config_.perception_half_angle)) {
          ap.target = child;
          ap.target_distance = d;
        }
      });
    }
    if (!filled.empty()) {
      std::sort(filled.begin(), filled.end());
      for (auto& ap : pool_)
        if (ap.alive && ap.target != kNoNode &&
            std::binary_search(filled.begin(), filled.end(), ap.target))
          rescan(ap);
    }
    return static_cast<int>(added.size());
  }

 private:
  bool owns(NodeId id) const {
    const auto& n = forest_.node(id);
    const auto& t = forest_.tree_of(id);
    return n.origin == NodeOrigin::growth && t.kind == kind_ && t.layer == layer_;
  }

  double kill_distance() const { return config_.kill_factor * config_.perception_distance; }

  void rescan(AttractionPoint& ap) const {
    ap.target = kNoNode;
    ap.target_distance = std::numeric_limits<double>::infinity();
    nodes_.for_each_near(ap.position.xy(), [&](int idx) {
      if (!ap.alive) return;
      const auto id = static_cast<NodeId>(idx);
      const auto& n = forest_.node(id);
      const double d = distance(ap.position, n.position);
      if (d < kill_distance()) {
        ap.alive = false;
        return;
      }
      if (n.child_count() >= 2 || d >= ap.target_distance) return;
      if (in_perception_cone(n.position, forest_.direction(id), ap.position,
                             config_.perception_distance, config_.perception_half_angle)) {
        ap.target = id;
        ap.target_distance = d;
      }
    });
  }

  VesselForest& forest_;
  const GrowthDomain& domain_;
  const GrowthConfig& config_;
  const FazGeometry& faz_;
  VesselKind kind_;
  Layer layer_;
  BucketGrid nodes_;
  BucketGrid points_;
  std::vector<AttractionPoint> pool_;
};

Vec3 border_point(double angle_deg) {
  const double a = angle_deg * kPi / 180.0;
  // Image convention: y grows downward, so positive angles point up.
  const Vec2 dir{std::cos(a), -std::sin(a)};
  const double t = 0.5 / std::max(std::abs(dir.x), std::abs(dir.y));
  return {std::clamp(0.5 + t * dir.x, 0.0, 1.0), std::clamp(0.5 + t * dir.y, 0.0, 1.0), 0.0};
}

void run_phase(VesselForest& forest, const GrowthDomain& domain, const GrowthConfig& config,
               const FazGeometry& faz, Layer layer, Rng& rng) {
  Colonizer arterial(forest, domain, config, faz, VesselKind::arterial, layer);
  Colonizer venous(forest, domain, config, faz, VesselKind::venous, layer);
  const int sinks = config.attraction_points_per_iteration;
  const int sources = std::max(
      1, static_cast<int>(std::lround(config.attraction_points_per_iteration / config.sink_source_ratio)));
  for (int it = 0; it < config.iterations_per_layer; ++it) {
    arterial.add_points(sinks, rng);
    venous.add_points(sources, rng);
    arterial.grow();
    venous.grow();
  }
  forest.assign_radii(config.terminal_radius, config.kappa);
}

void seed_deep_trees(VesselForest& forest, const GrowthDomain& domain, const GrowthConfig& config,
                     Rng& rng) {
  for (VesselKind kind : {VesselKind::arterial, VesselKind::venous}) {
    std::vector<NodeId> candidates;
    for (NodeId id : forest.growth_leaves())
      if (forest.kind_of(id) == kind && forest.tree_of(id).layer == Layer::superficial)
        candidates.push_back(id);
    const auto take = std::min<std::size_t>(candidates.size(),
                                            static_cast<std::size_t>(config.deep_seeds_per_kind));
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(candidates.size() - 1)));
      std::swap(candidates[i], candidates[j]);
      const NodeId leaf = candidates[i];
      const Vec3 pos = forest.node(leaf).position;
      const Vec3 d = forest.direction(leaf);
      Vec3 heading{d.x, d.y, 0.0};
      const double len = norm(heading);
      if (len < 1e-9) {
        const double a = rng.uniform(0.0, 2.0 * kPi);
        heading = {std::cos(a), std::sin(a), 0.0};
      } else {
        heading = heading * (1.0 / len);
      }
      forest.add_root({pos.x, pos.y, domain.layer_max_z(Layer::deep)}, config.terminal_radius, kind,
                      Layer::deep, heading);
    }
  }
}

}  // namespace

VesselForest grow_forest(const GrowthDomain& domain, const GrowthConfig& config,
                         const FazGeometry& faz, Rng& rng) {
  domain.validate();
  config.validate();
  if (!(faz.radius > 0.0)) throw ConfigError("FAZ radius must be positive");

  VesselForest forest;
  const double root_z = 0.5 * (domain.layer_min_z(Layer::superficial) + domain.layer_max_z(Layer::superficial));
  auto place_roots = [&](const std::vector<double>& angles, VesselKind kind) {
    for (double angle : angles) {
      Vec3 pos = border_point(angle);
      pos.z = root_z;
      Vec3 heading = Vec3{0.5, 0.5, root_z} - pos;
      heading = heading * (1.0 / norm(heading));
      forest.add_root(pos, config.terminal_radius, kind, Layer::superficial, heading);
    }
  };
  place_roots(config.arterial_root_angles, VesselKind::arterial);
  place_roots(config.venous_root_angles, VesselKind::venous);

  run_phase(forest, domain, config, faz, Layer::superficial, rng);
  seed_deep_trees(forest, domain, config, rng);
  run_phase(forest, domain, config, faz, Layer::deep, rng);
  return forest;
}

}  // namespace svr
