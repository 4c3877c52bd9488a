#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "svr/forest.hpp"
#include "svr/pathology.hpp"

namespace svr {

struct RasterConfig {
  int resolution = 512;
  int supersample = 2;
  double threshold = 0.1;
  /// Intensity of the thinnest vessels; wider vessels brighten linearly up to
  /// 1 at `bright_radius` (normalized units).
  double base_intensity = 0.4;
  double bright_radius = 0.012;
  /// Segments thinner than this (output pixels) are widened to it.
  double min_radius_px = 0.25;
  double mm_per_unit = 3.0;

  void validate() const;
};

/// Thick line with round caps, in normalized coordinates.
struct Capsule {
  Vec2 a;
  Vec2 b;
  double radius = 0.0;
  double intensity = 1.0;
};

struct VesselMap {
  int width = 0;
  int height = 0;
  std::vector<float> intensity;
  std::vector<std::uint8_t> mask;
  double pixel_pitch_mm = 0.0;

  float at(int x, int y) const { return intensity[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t mask_at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x]; }
  std::size_t mask_area() const;
};

/// Pathology structures drawn on top of the forest.
struct Appendages {
  std::span<const MicroaneurysmRecord> microaneurysms;
  std::span<const NeovascularTuft> tufts;
};

double segment_intensity(double radius, const RasterConfig& config);

/// Every forest segment plus MA disks and NV polylines as capsules.
std::vector<Capsule> scene_capsules(const VesselForest& forest, const Appendages& appendages,
                                    const RasterConfig& config);

/// Renders at resolution * supersample with max compositing, then box
/// filters down to the output resolution.
VesselMap render_capsules(std::span<const Capsule> capsules, const RasterConfig& config);

VesselMap rasterize(const VesselForest& forest, const Appendages& appendages,
                    const RasterConfig& config);

/// 1 where intensity >= threshold, else 0.
std::vector<std::uint8_t> binarize(std::span<const float> intensity, double threshold);

/// Intensity quantized to 8-bit grey levels.
std::vector<std::uint8_t> to_gray8(std::span<const float> intensity);

}  // namespace svr
