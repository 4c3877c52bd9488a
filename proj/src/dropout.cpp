#include "svr/dropout.hpp"

#include <algorithm>
#include <cmath>

#include "svr/growth.hpp"

namespace svr {

void DropoutRegion::validate() const {
  if (!(radius > 0.0)) throw ConfigError("dropout radius must be positive");
  if (!(axis_a > 0.0 && axis_b > 0.0)) throw ConfigError("dropout axis ratios must be positive");
  if (!(exponent > 0.0)) throw ConfigError("dropout shape exponent must be positive");
  if (!(noise_gain >= 0.0)) throw ConfigError("dropout noise gain must be non-negative");
  if (!(strength >= 0.0 && strength <= 1.0)) throw ConfigError("dropout strength must lie in [0, 1]");
  for (const auto& h : harmonics)
    if (h.mode != 2 && h.mode != 3 && h.mode != 5)
      throw ConfigError("dropout harmonic modes must be 2, 3 or 5");
}

double ellipse_radius(const DropoutRegion& region, double theta) {
  const double cx = std::cos(theta) / region.axis_a;
  const double sy = std::sin(theta) / region.axis_b;
  return region.radius / std::sqrt(cx * cx + sy * sy);
}

double modulated_radius(const DropoutRegion& region, double theta) {
  double factor = 1.0;
  for (const auto& h : region.harmonics) factor += h.amplitude * std::cos(h.mode * theta + h.phase);
  if (!(factor > 0.0)) throw ShapeError("harmonic modulation collapses the lesion boundary");
  return ellipse_radius(region, theta) * factor;
}

double inside_score_polar(const DropoutRegion& region, double rho, double theta) {
  if (rho <= 0.0) return 1.0;
  const double t = 1.0 - rho / modulated_radius(region, theta);
  if (t <= 0.0) return 0.0;
  return std::pow(t, region.exponent);
}

double inside_score(const DropoutRegion& region, Vec2 x) {
  const Vec2 d = x - region.center;
  return inside_score_polar(region, norm(d), std::atan2(d.y, d.x));
}

double noise_field(const DropoutRegion& region, Vec2 x) {
  if (region.noise.empty()) return 0.5;
  double sum = 0.0;
  double scale = 0.0;
  for (const auto& c : region.noise) {
    sum += c.weight * std::sin(2.0 * kPi * dot(c.frequency, x) + c.phase);
    scale += std::abs(c.weight);
  }
  if (scale <= 0.0) return 0.5;
  return std::clamp(0.5 + 0.5 * sum / scale, 0.0, 1.0);
}

double region_value(const DropoutRegion& region, Vec2 x) {
  const double u = inside_score(region, x);
  if (u <= 0.0) return 0.0;
  const double modulation = std::clamp(0.75 + region.noise_gain * (noise_field(region, x) - 0.5), 0.0, 1.2);
  return std::clamp(u * modulation, 0.0, 1.0);
}

double region_area(const DropoutRegion& region) {
  constexpr int kSamples = 720;
  double sum = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    const double r = modulated_radius(region, 2.0 * kPi * i / kSamples);
    sum += 0.5 * r * r;
  }
  return sum * 2.0 * kPi / kSamples;
}

double region_mean_value(const DropoutRegion& region) {
  constexpr int kGrid = 48;
  double reach = 0.0;
  for (int i = 0; i < 360; ++i) reach = std::max(reach, modulated_radius(region, 2.0 * kPi * i / 360));
  double sum = 0.0;
  int count = 0;
  for (int iy = 0; iy < kGrid; ++iy) {
    for (int ix = 0; ix < kGrid; ++ix) {
      const Vec2 x = region.center + Vec2{reach * (2.0 * (ix + 0.5) / kGrid - 1.0),
                                          reach * (2.0 * (iy + 0.5) / kGrid - 1.0)};
      if (inside_score(region, x) <= 0.0) continue;
      sum += region_value(region, x);
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

DropoutField::DropoutField(std::vector<DropoutRegion> regions) : regions_(std::move(regions)) {
  for (const auto& r : regions_) r.validate();
}

double DropoutField::max_strength() const {
  double s = 0.0;
  for (const auto& r : regions_) s = std::max(s, r.strength);
  return s;
}

double DropoutField::value(Vec2 x) const {
  double c = 0.0;
  for (const auto& r : regions_) c = std::max(c, region_value(r, x));
  return c;
}

Vec2 DropoutField::nearest_center(Vec2 x) const {
  Vec2 best = x;
  double best_d = 0.0;
  bool found = false;
  for (const auto& r : regions_) {
    const double d = distance(x, r.center);
    if (!found || d < best_d) {
      best = r.center;
      best_d = d;
      found = true;
    }
  }
  return best;
}

}  // namespace svr
