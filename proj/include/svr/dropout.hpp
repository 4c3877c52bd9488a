#pragma once

#include <stdexcept>
#include <vector>

#include "svr/geometry.hpp"

namespace svr {

/// One angular harmonic of a lesion boundary: A * cos(m * theta + phi).
struct Harmonic {
  int mode = 2;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// One sinusoid of a lesion's noise field: weight * sin(2 pi f . x + phase).
struct NoiseComponent {
  Vec2 frequency;
  double phase = 0.0;
  double weight = 1.0;
};

/// Raised when harmonic modulation would make the boundary radius non-positive.
class ShapeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Irregular-ellipse capillary dropout lesion.
struct DropoutRegion {
  Vec2 center{0.5, 0.5};
  double radius = 0.25;
  double axis_a = 1.0;
  double axis_b = 1.0;
  std::vector<Harmonic> harmonics;
  /// Shape exponent of the inside-score falloff.
  double exponent = 2.0;
  double noise_gain = 0.0;
  double strength = 0.95;
  std::vector<NoiseComponent> noise;

  /// Throws ConfigError when a field violates its documented range.
  void validate() const;
};

/// Ellipse radius in direction `theta`.
double ellipse_radius(const DropoutRegion& region, double theta);

/// Ellipse radius scaled by 1 + sum of harmonics; throws ShapeError when the
/// factor is not positive.
double modulated_radius(const DropoutRegion& region, double theta);

/// [1 - rho / R~(theta)]_+ ^ exponent for polar coordinates about the centre.
double inside_score_polar(const DropoutRegion& region, double rho, double theta);
double inside_score(const DropoutRegion& region, Vec2 x);

/// Sum of the region's sinusoids mapped affinely into [0, 1]; 0.5 when the
/// region has no components.
double noise_field(const DropoutRegion& region, Vec2 x);

/// Per-lesion dropout depth: inside-score times the clipped noise factor,
/// capped to [0, 1].
double region_value(const DropoutRegion& region, Vec2 x);

/// Area enclosed by the modulated boundary (polar quadrature).
double region_area(const DropoutRegion& region);

/// Mean of region_value over the interior of the boundary.
double region_mean_value(const DropoutRegion& region);

/// Pointwise maximum of the per-lesion dropout depths.
class DropoutField {
 public:
  DropoutField() = default;
  explicit DropoutField(std::vector<DropoutRegion> regions);

  const std::vector<DropoutRegion>& regions() const { return regions_; }
  bool empty() const { return regions_.empty(); }

  /// Largest lesion strength, 0 without lesions.
  double max_strength() const;
  double value(Vec2 x) const;
  /// Centre of the lesion closest to `x`; `x` itself when the field is empty.
  Vec2 nearest_center(Vec2 x) const;

 private:
  std::vector<DropoutRegion> regions_;
};

inline double dropout_value(const DropoutField& field, Vec2 x) { return field.value(x); }

}  // namespace svr
