#include "svr/raster.hpp"

#include <algorithm>
#include <cmath>

namespace svr {

void RasterConfig::validate() const {
  if (resolution <= 0) throw ConfigError("raster resolution must be positive");
  if (supersample < 1) throw ConfigError("supersample factor must be at least 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("binarize threshold must lie in (0, 1)");
  if (!(base_intensity > 0.0 && base_intensity <= 1.0))
    throw ConfigError("base intensity must lie in (0, 1]");
  if (!(bright_radius > 0.0)) throw ConfigError("bright radius must be positive");
  if (!(min_radius_px > 0.0)) throw ConfigError("minimum radius must be positive");
}

std::size_t VesselMap::mask_area() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

double segment_intensity(double radius, const RasterConfig& config) {
  const double t = std::min(1.0, radius / config.bright_radius);
  return std::min(1.0, config.base_intensity + (1.0 - config.base_intensity) * t);
}

std::vector<Capsule> scene_capsules(const VesselForest& forest, const Appendages& appendages,
                                    const RasterConfig& config) {
  std::vector<Capsule> out;
  out.reserve(forest.size());
  for (const auto& n : forest.nodes()) {
    if (n.is_root()) continue;
    out.push_back({forest.node(n.parent).position.xy(), n.position.xy(), n.radius,
                   segment_intensity(n.radius, config)});
  }
  for (const auto& ma : appendages.microaneurysms) {
    const double r = ma.radius_mm / config.mm_per_unit;
    out.push_back({ma.center, ma.center, r, segment_intensity(r, config)});
  }
  for (const auto& tuft : appendages.tufts) {
    const int steps = tuft.steps();
    for (int t = 1; t <= steps; ++t) {
      const double r = tuft.radius_at(static_cast<double>(t) / steps);
      out.push_back({tuft.main[static_cast<std::size_t>(t - 1)], tuft.main[static_cast<std::size_t>(t)], r,
                     segment_intensity(r, config)});
    }
    for (std::size_t s = 0; s < tuft.sides.size(); ++s) {
      const auto& side = tuft.sides[s];
      const double r0 = tuft.radius_at(static_cast<double>(tuft.side_anchors[s]) / steps);
      const int n_side = static_cast<int>(side.size()) - 1;
      for (int k = 1; k <= n_side; ++k) {
        const double r = taper_radius(r0, tuft.radius_end, static_cast<double>(k) / n_side);
        out.push_back({side[static_cast<std::size_t>(k - 1)], side[static_cast<std::size_t>(k)], r,
                       segment_intensity(r, config)});
      }
    }
  }
  return out;
}

namespace {

void draw_capsule(std::vector<float>& buffer, int size, const Capsule& c, double radius_px) {
  const double scale = size;
  const Vec2 a = c.a * scale;
  const Vec2 b = c.b * scale;
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  const double r2 = radius_px * radius_px;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - radius_px)));
  const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + radius_px)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - radius_px)));
  const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + radius_px)));
  const auto value = static_cast<float>(c.intensity);
  for (int y = y0; y <= y1; ++y) {
    float* row = buffer.data() + static_cast<std::size_t>(y) * size;
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p{x + 0.5, y + 0.5};
      const Vec2 ap = p - a;
      const double t = len2 > 0.0 ? std::clamp(dot(ap, ab) / len2, 0.0, 1.0) : 0.0;
      const Vec2 d = ap - ab * t;
      if (dot(d, d) <= r2) row[x] = std::max(row[x], value);
    }
  }
}

}  // namespace

VesselMap render_capsules(std::span<const Capsule> capsules, const RasterConfig& config) {
  config.validate();
  const int out_size = config.resolution;
  const int factor = config.supersample;
  const int fine = out_size * factor;
  std::vector<float> buffer(static_cast<std::size_t>(fine) * fine, 0.0f);
  for (const auto& c : capsules) {
    const double radius_out_px = std::max(c.radius * out_size, config.min_radius_px);
    draw_capsule(buffer, fine, c, radius_out_px * factor);
  }

  VesselMap map;
  map.width = out_size;
  map.height = out_size;
  map.pixel_pitch_mm = config.mm_per_unit / out_size;
  map.intensity.assign(static_cast<std::size_t>(out_size) * out_size, 0.0f);
  const float norm_factor = 1.0f / static_cast<float>(factor * factor);
  for (int y = 0; y < out_size; ++y) {
    for (int x = 0; x < out_size; ++x) {
      float sum = 0.0f;
      for (int sy = 0; sy < factor; ++sy) {
        const float* row = buffer.data() + static_cast<std::size_t>(y * factor + sy) * fine + x * factor;
        for (int sx = 0; sx < factor; ++sx) sum += row[sx];
      }
      map.intensity[static_cast<std::size_t>(y) * out_size + x] = std::clamp(sum * norm_factor, 0.0f, 1.0f);
    }
  }
  map.mask = binarize(map.intensity, config.threshold);
  return map;
}

VesselMap rasterize(const VesselForest& forest, const Appendages& appendages,
                    const RasterConfig& config) {
  const auto capsules = scene_capsules(forest, appendages, config);
  return render_capsules(capsules, config);
}

std::vector<std::uint8_t> binarize(std::span<const float> intensity, double threshold) {
  std::vector<std::uint8_t> mask(intensity.size());
  for (std::size_t i = 0; i < intensity.size(); ++i) mask[i] = intensity[i] >= threshold ? 1 : 0;
  return mask;
}

std::vector<std::uint8_t> to_gray8(std::span<const float> intensity) {
  std::vector<std::uint8_t> out(intensity.size());
  for (std::size_t i = 0; i < intensity.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(intensity[i], 0.0f, 1.0f) * 255.0f));
  return out;
}

}  // namespace svr
