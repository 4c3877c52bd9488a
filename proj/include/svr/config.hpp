#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "svr/annotate.hpp"
#include "svr/diversify.hpp"
#include "svr/growth.hpp"
#include "svr/pathology.hpp"
#include "svr/raster.hpp"

namespace svr {

inline constexpr std::string_view kGeneratorVersion = "0.1.0";

/// Closed interval [lo, hi].
template <class T>
struct Range {
  T lo{};
  T hi{};

  bool contains(T v) const { return v >= lo && v <= hi; }
  bool operator==(const Range&) const = default;
};

/// Per-sample sampling ranges and fixed pathology constants.
struct PathologyRanges {
  /// Share of samples with no pathology at all.
  double healthy_fraction = 0.3;
  /// Share of samples with neovascularization. Healthy and NV samples are
  /// disjoint, so the two fractions may not exceed 1 together.
  double nv_probability = 0.4;

  Range<int> dropout_count{0, 6};
  Range<double> dropout_radius{0.18, 0.32};
  Range<double> dropout_strength{0.90, 0.99};
  Range<double> dropout_exponent{2.0, 3.0};
  Range<double> dropout_noise_gain{0.20, 0.40};
  /// Lesion centre distance from the FAZ centre.
  Range<double> dropout_distance{0.10, 0.35};
  Range<double> dropout_aspect{0.80, 1.25};
  Range<double> harmonic_amplitude{0.0, 0.10};
  Range<double> noise_frequency{2.0, 6.0};
  int noise_components = 3;

  Range<double> ma_radius_mm{0.01, 0.08};
  Range<double> ma_length_factor{0.3, 0.4};

  Range<double> nv_severity{0.2, 0.7};
  Range<double> nv_footprint{0.015, 0.07};
  Range<int> nv_length{3, 6};

  Range<double> tortuosity_gain{0.01, 0.5};
  double tortuosity_band_min = 0.30;
  double tortuosity_band_max = 0.75;

  /// Removal fraction is the strongest lesion strength clamped to this range.
  Range<double> drop_fraction_clamp{0.1, 0.95};

  void validate() const;
};

struct TextConfig {
  ConversationMode mode = ConversationMode::finetune;
};

struct RunConfig {
  /// Worker threads. Not part of the digest: output does not depend on it.
  int parallel = 1;
  /// Teacher rewrite and question paraphrasing.
  bool diversify = false;
};

struct GeneratorConfig {
  GrowthDomain domain;
  GrowthConfig growth;
  FazGeometry faz;
  PruningConfig pruning;
  /// Fixed MA and NV constants; sampled fields are overwritten per sample.
  MicroaneurysmConfig microaneurysm;
  NeovascularConfig neovascular;
  PathologyRanges ranges;
  RasterConfig raster;
  TextConfig text;
  TeacherEndpointConfig teacher;
  RunConfig run;

  /// Throws ConfigError on the first invalid field.
  void validate() const;
};

/// Full configuration document. With `include_parallel` false the result is
/// the canonical form embedded in manifests and hashed for the digest.
nlohmann::json config_to_json(const GeneratorConfig& config, bool include_parallel = true);

/// Overlays `doc` on the defaults. Unknown sections or keys, wrong types and
/// invalid values raise ConfigError.
GeneratorConfig config_from_json(const nlohmann::json& doc);

GeneratorConfig load_config(const std::filesystem::path& path);

/// Hex SHA-256 of the generator version and the canonical configuration.
std::string config_digest(const GeneratorConfig& config);

}  // namespace svr
