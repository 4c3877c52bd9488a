#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "svr/dropout.hpp"
#include "svr/forest.hpp"
#include "svr/growth.hpp"
#include "svr/random.hpp"

namespace svr {

struct PruningConfig {
  /// Leaves with dropout depth at or above this value may regress.
  double regression_threshold = 0.35;
  /// Exponent on (1 - c) in the removal weight.
  double core_bias = 2.0;
  /// Exponent on 1 / r in the removal weight; kept within [0.3, 1].
  double radius_bias = 0.6;
  /// Fraction of eligible leaves to remove.
  double drop_fraction = 0.9;
  double elongation_min = 1.0;
  double elongation_max = 1.2;
  double dilation_min = 1.0;
  double dilation_max = 1.3;

  void validate() const;
};

struct MicroaneurysmConfig {
  double base_probability = 0.03;
  double severity_coupling = 15.0;
  double local_coupling = 1.0;
  double band_min = 0.2;
  double band_max = 0.6;
  double radius_min_mm = 0.01;
  double radius_max_mm = 0.08;
  /// Offset of the MA centre from its node, in units of the growth step.
  double length_factor = 0.35;
  double step = 0.01;
  double mm_per_unit = 3.0;
  /// Lesion area at which the area reweighting factor is 1.
  double reference_area = kPi * 0.25 * 0.25;
  int cluster_min = 2;
  int cluster_max = 5;

  void validate() const;
};

struct NeovascularConfig {
  /// Global severity in [0, 1]; zero disables neovascularization.
  double severity = 0.0;
  /// Target extent of a main sprout (normalized units).
  double footprint = 0.04;
  int length_min = 3;
  int length_max = 6;
  double group_base = 1.0;
  double group_gain = 4.0;
  double persistence_weight = 0.6;
  double radial_weight = 0.2;
  double swirl_weight = 0.2;
  double jitter_std = 0.15;
  /// A sprout point must see at least this dropout depth.
  double containment = 0.05;
  double start_ratio = 0.6;
  double end_ratio = 0.3;
  int max_attempts = 16;

  void validate() const;
};

struct TortuosityConfig {
  double gain = 0.0;
  double band_min = 0.30;
  double band_max = 0.75;

  void validate() const;
};

struct MicroaneurysmRecord {
  Vec2 center;
  double radius_mm = 0.0;
  NodeId parent = kNoNode;
  /// MA centre node followed by its cluster nodes.
  std::vector<NodeId> cluster;
  /// Cluster node positions and radii (normalized), parallel to `cluster`.
  std::vector<Vec2> cluster_positions;
  std::vector<double> cluster_radii;
};

struct NeovascularTuft {
  NodeId origin = kNoNode;
  std::vector<Vec2> main;
  std::vector<std::vector<Vec2>> sides;
  /// Index into `main` where each side branch starts.
  std::vector<int> side_anchors;
  double radius_start = 0.0;
  double radius_end = 0.0;
  double severity = 0.0;
  double step_length = 0.0;

  int steps() const { return static_cast<int>(main.size()) - 1; }
  /// Radius at fraction `tau` along the main sprout.
  double radius_at(double tau) const;
};

/// (1 - tau) * r_start + tau * r_end.
double taper_radius(double r_start, double r_end, double tau);

/// Successive weighted draws without replacement, realised with exponential
/// keys: returns every index with positive weight ordered by draw, followed
/// by zero-weight indices in index order.
std::vector<std::size_t> weighted_draw_order(std::span<const double> weights, Rng& rng);

/// First `count` entries of weighted_draw_order.
std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights,
                                                             std::size_t count, Rng& rng);

/// Removal weight (1 - c)^core_bias * r^-radius_bias.
double pruning_weight(double dropout, double radius, const PruningConfig& config);

/// Weighted removal of terminal capillaries inside regressing tissue. After
/// the chosen leaves go, any segment left with no surviving descendant and
/// sitting at or above the regression threshold retracts too. Radii are
/// recomputed bottom-up afterwards. Returns the number of leaves chosen.
std::size_t prune_capillaries(VesselForest& forest, const DropoutField& field,
                              const PruningConfig& config, double kappa, Rng& rng);

/// Elongates and dilates surviving growth nodes inside the lesions, then
/// restores the branching law at bifurcations. Elongations that would leave
/// the domain or enter the FAZ are skipped.
void remodel_survivors(VesselForest& forest, const DropoutField& field,
                       const PruningConfig& config, const GrowthDomain& domain,
                       const FazGeometry& faz, double kappa, Rng& rng);

/// clamp(area of largest lesion / reference area, 0.5, 2); 1 without lesions.
double ma_area_factor(const DropoutField& field, const MicroaneurysmConfig& config);

/// min(1, p0 (1 + lambda_s s_max)(1 + lambda_c c) * area_factor).
double ma_spawn_probability(double dropout, double max_strength, const MicroaneurysmConfig& config,
                            double area_factor = 1.0);

/// One trial node per arterial growth segment, where a segment is the
/// unbranched run below a root or bifurcation down to the next bifurcation
/// or leaf. The trial node is the middle of the run's nodes that still have
/// room for a child. Ordered by segment start id.
std::vector<NodeId> ma_trial_nodes(const VesselForest& forest);

/// Bernoulli trial at each segment's trial node whose dropout depth lies in
/// the MA band. A success adds an MA hub beside the node plus a small
/// cluster around it.
std::vector<MicroaneurysmRecord> spawn_microaneurysms(VesselForest& forest,
                                                      const DropoutField& field,
                                                      const MicroaneurysmConfig& config, Rng& rng);

/// Number of sprout groups for a severity: round(base + gain * severity), 0
/// for zero severity.
int nv_group_count(const NeovascularConfig& config);

std::vector<NeovascularTuft> grow_nv_tufts(VesselForest& forest, const DropoutField& field,
                                           const FazGeometry& faz, const NeovascularConfig& config,
                                           Rng& rng);

/// Perpendicular jitter of arterial growth nodes whose dropout depth lies in
/// the tortuosity band. Returns the number of nodes displaced.
std::size_t apply_tortuosity(VesselForest& forest, const DropoutField& field,
                             const TortuosityConfig& config, double step, const FazGeometry& faz,
                             Rng& rng);

}  // namespace svr
