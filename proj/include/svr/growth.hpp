#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "svr/forest.hpp"
#include "svr/geometry.hpp"
#include "svr/random.hpp"

namespace svr {

/// Raised for invalid or inconsistent configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Normalized growth box [0,1] x [0,1] x [0,depth].
struct GrowthDomain {
  double depth = 0.05;
  /// Millimetres per normalized lateral unit (a 3 x 3 mm macular crop).
  double mm_per_unit = 3.0;
  /// Fraction of the depth, measured from the top, occupied by the
  /// superficial complex; the deep complex fills the same fraction at the
  /// bottom.
  double layer_fraction = 0.4;

  bool contains(Vec3 p) const {
    return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0 && p.z >= 0.0 && p.z <= depth;
  }
  double layer_min_z(Layer layer) const {
    return layer == Layer::superficial ? depth * (1.0 - layer_fraction) : 0.0;
  }
  double layer_max_z(Layer layer) const {
    return layer == Layer::superficial ? depth : depth * layer_fraction;
  }
  void validate() const;
};

struct FazGeometry {
  Vec2 center{0.5, 0.5};
  double radius = 0.08;
  double jitter_radius = 0.08;
  double max_shift = 0.05;

  bool contains(Vec2 p) const { return distance(p, center) < radius; }
};

struct GrowthConfig {
  double perception_distance = 0.05;
  double perception_half_angle = 35.0 * kPi / 180.0;
  double step = 0.01;
  double kappa = 3.0;
  double direction_weight = 0.7;
  /// Attraction points consumed when a node comes within this multiple of the
  /// perception distance.
  double kill_factor = 0.5;
  int attraction_points_per_iteration = 48;
  int iterations_per_layer = 100;
  double terminal_radius = 0.003;
  /// Oxygen sinks sampled per CO2 source.
  double sink_source_ratio = 1.0;
  /// Border root placement, degrees about the image centre (y down).
  std::vector<double> arterial_root_angles{35.0, 215.0};
  std::vector<double> venous_root_angles{145.0, 325.0};
  /// Deep trees seeded below superficial endpoints, per vessel kind.
  int deep_seeds_per_kind = 6;

  void validate() const;
};

/// (r1^kappa + r2^kappa)^(1/kappa). Throws std::domain_error when both radii
/// are zero, a radius is negative, or kappa <= 0.
double murray_parent_radius(double r1, double r2, double kappa);

/// Image centre plus a uniform draw from the disk of radius `jitter_radius`,
/// shortened to at most `max_shift`.
Vec2 sample_faz_center(double jitter_radius, double max_shift, Rng& rng);

bool in_perception_cone(Vec3 tip, Vec3 direction, Vec3 point, double distance_limit,
                        double half_angle);

/// Points within `distance_limit` of `tip` whose angle to `direction` is at
/// most `half_angle`, in input order.
std::vector<Vec3> perception_cone_filter(Vec3 tip, Vec3 direction, std::span<const Vec3> points,
                                         double distance_limit, double half_angle);

/// Thrown by growth_direction when the blended direction vanishes.
class DegenerateDirection : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// normalize(w * normalize(attraction) + (1 - w) * normalize(branching)).
Vec3 growth_direction(Vec3 attraction, Vec3 branching, double weight);

/// Space-colonization growth of two arterial and two venous border trees in
/// the superficial layer, followed by deep trees seeded under superficial
/// endpoints. Radii follow Murray's law from the terminal floor upward.
VesselForest grow_forest(const GrowthDomain& domain, const GrowthConfig& config,
                         const FazGeometry& faz, Rng& rng);

}  // namespace svr
