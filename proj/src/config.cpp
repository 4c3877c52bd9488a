#include "svr/config.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>

namespace svr {

namespace {

using nlohmann::json;

template <class T>
json range_json(const Range<T>& r) {
  return json::array({r.lo, r.hi});
}

template <class T>
Range<T> range_from(const json& j, const char* name) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(std::string(name) + " must be [lo, hi]");
  return {j.at(0).get<T>(), j.at(1).get<T>()};
}

template <class T>
void check_range(const Range<T>& r, const char* name) {
  if (!(r.lo <= r.hi)) throw ConfigError(std::string(name) + ": lower bound exceeds upper bound");
}

/// Copies `overlay` onto `base`, refusing keys that `base` does not have.
void merge_strict(json& base, const json& overlay, const std::string& path) {
  if (!overlay.is_object()) throw ConfigError(path + " must be an object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown configuration key: " + where);
    json& slot = base[key];
    if (slot.is_object()) {
      merge_strict(slot, value, where);
    } else {
      slot = value;
    }
  }
}

json growth_json(const GeneratorConfig& c) {
  const auto& g = c.growth;
  return {
      {"depth", c.domain.depth},
      {"layer_fraction", c.domain.layer_fraction},
      {"mm_per_unit", c.domain.mm_per_unit},
      {"perception_distance", g.perception_distance},
      {"perception_half_angle_rad", g.perception_half_angle},
      {"step", g.step},
      {"kappa", g.kappa},
      {"direction_weight", g.direction_weight},
      {"kill_factor", g.kill_factor},
      {"attraction_points_per_iteration", g.attraction_points_per_iteration},
      {"iterations_per_layer", g.iterations_per_layer},
      {"terminal_radius", g.terminal_radius},
      {"sink_source_ratio", g.sink_source_ratio},
      {"arterial_root_angles_deg", g.arterial_root_angles},
      {"venous_root_angles_deg", g.venous_root_angles},
      {"deep_seeds_per_kind", g.deep_seeds_per_kind},
      {"faz", {{"radius", c.faz.radius}, {"jitter_radius", c.faz.jitter_radius}, {"max_shift", c.faz.max_shift}}},
  };
}

void read_growth(const json& j, GeneratorConfig& c) {
  auto& g = c.growth;
  c.domain.depth = j.at("depth").get<double>();
  c.domain.layer_fraction = j.at("layer_fraction").get<double>();
  c.domain.mm_per_unit = j.at("mm_per_unit").get<double>();
  g.perception_distance = j.at("perception_distance").get<double>();
  g.perception_half_angle = j.at("perception_half_angle_rad").get<double>();
  g.step = j.at("step").get<double>();
  g.kappa = j.at("kappa").get<double>();
  g.direction_weight = j.at("direction_weight").get<double>();
  g.kill_factor = j.at("kill_factor").get<double>();
  g.attraction_points_per_iteration = j.at("attraction_points_per_iteration").get<int>();
  g.iterations_per_layer = j.at("iterations_per_layer").get<int>();
  g.terminal_radius = j.at("terminal_radius").get<double>();
  g.sink_source_ratio = j.at("sink_source_ratio").get<double>();
  g.arterial_root_angles = j.at("arterial_root_angles_deg").get<std::vector<double>>();
  g.venous_root_angles = j.at("venous_root_angles_deg").get<std::vector<double>>();
  g.deep_seeds_per_kind = j.at("deep_seeds_per_kind").get<int>();
  const auto& faz = j.at("faz");
  c.faz.radius = faz.at("radius").get<double>();
  c.faz.jitter_radius = faz.at("jitter_radius").get<double>();
  c.faz.max_shift = faz.at("max_shift").get<double>();
}

json pathology_json(const GeneratorConfig& c) {
  const auto& r = c.ranges;
  const auto& p = c.pruning;
  const auto& ma = c.microaneurysm;
  const auto& nv = c.neovascular;
  return {
      {"healthy_fraction", r.healthy_fraction},
      {"nv_probability", r.nv_probability},
      {"dropout_count", range_json(r.dropout_count)},
      {"dropout_radius", range_json(r.dropout_radius)},
      {"dropout_strength", range_json(r.dropout_strength)},
      {"dropout_exponent", range_json(r.dropout_exponent)},
      {"dropout_noise_gain", range_json(r.dropout_noise_gain)},
      {"dropout_distance", range_json(r.dropout_distance)},
      {"dropout_aspect", range_json(r.dropout_aspect)},
      {"harmonic_amplitude", range_json(r.harmonic_amplitude)},
      {"noise_frequency", range_json(r.noise_frequency)},
      {"noise_components", r.noise_components},
      {"ma_radius_mm", range_json(r.ma_radius_mm)},
      {"ma_length_factor", range_json(r.ma_length_factor)},
      {"nv_severity", range_json(r.nv_severity)},
      {"nv_footprint", range_json(r.nv_footprint)},
      {"nv_length", range_json(r.nv_length)},
      {"tortuosity_gain", range_json(r.tortuosity_gain)},
      {"tortuosity_band", {r.tortuosity_band_min, r.tortuosity_band_max}},
      {"drop_fraction_clamp", range_json(r.drop_fraction_clamp)},
      {"pruning",
       {{"regression_threshold", p.regression_threshold},
        {"core_bias", p.core_bias},
        {"radius_bias", p.radius_bias},
        {"elongation", {p.elongation_min, p.elongation_max}},
        {"dilation", {p.dilation_min, p.dilation_max}}}},
      {"microaneurysm",
       {{"base_probability", ma.base_probability},
        {"severity_coupling", ma.severity_coupling},
        {"local_coupling", ma.local_coupling},
        {"band", {ma.band_min, ma.band_max}},
        {"reference_area", ma.reference_area},
        {"cluster_size", {ma.cluster_min, ma.cluster_max}}}},
      {"neovascular",
       {{"group_base", nv.group_base},
        {"group_gain", nv.group_gain},
        {"persistence_weight", nv.persistence_weight},
        {"radial_weight", nv.radial_weight},
        {"swirl_weight", nv.swirl_weight},
        {"jitter_std", nv.jitter_std},
        {"containment", nv.containment},
        {"start_ratio", nv.start_ratio},
        {"end_ratio", nv.end_ratio},
        {"max_attempts", nv.max_attempts}}},
  };
}

void read_pathology(const json& j, GeneratorConfig& c) {
  auto& r = c.ranges;
  r.healthy_fraction = j.at("healthy_fraction").get<double>();
  r.nv_probability = j.at("nv_probability").get<double>();
  r.dropout_count = range_from<int>(j.at("dropout_count"), "dropout_count");
  r.dropout_radius = range_from<double>(j.at("dropout_radius"), "dropout_radius");
  r.dropout_strength = range_from<double>(j.at("dropout_strength"), "dropout_strength");
  r.dropout_exponent = range_from<double>(j.at("dropout_exponent"), "dropout_exponent");
  r.dropout_noise_gain = range_from<double>(j.at("dropout_noise_gain"), "dropout_noise_gain");
  r.dropout_distance = range_from<double>(j.at("dropout_distance"), "dropout_distance");
  r.dropout_aspect = range_from<double>(j.at("dropout_aspect"), "dropout_aspect");
  r.harmonic_amplitude = range_from<double>(j.at("harmonic_amplitude"), "harmonic_amplitude");
  r.noise_frequency = range_from<double>(j.at("noise_frequency"), "noise_frequency");
  r.noise_components = j.at("noise_components").get<int>();
  r.ma_radius_mm = range_from<double>(j.at("ma_radius_mm"), "ma_radius_mm");
  r.ma_length_factor = range_from<double>(j.at("ma_length_factor"), "ma_length_factor");
  r.nv_severity = range_from<double>(j.at("nv_severity"), "nv_severity");
  r.nv_footprint = range_from<double>(j.at("nv_footprint"), "nv_footprint");
  r.nv_length = range_from<int>(j.at("nv_length"), "nv_length");
  r.tortuosity_gain = range_from<double>(j.at("tortuosity_gain"), "tortuosity_gain");
  const auto band = range_from<double>(j.at("tortuosity_band"), "tortuosity_band");
  r.tortuosity_band_min = band.lo;
  r.tortuosity_band_max = band.hi;
  r.drop_fraction_clamp = range_from<double>(j.at("drop_fraction_clamp"), "drop_fraction_clamp");

  const auto& p = j.at("pruning");
  c.pruning.regression_threshold = p.at("regression_threshold").get<double>();
  c.pruning.core_bias = p.at("core_bias").get<double>();
  c.pruning.radius_bias = p.at("radius_bias").get<double>();
  const auto elong = range_from<double>(p.at("elongation"), "pruning.elongation");
  c.pruning.elongation_min = elong.lo;
  c.pruning.elongation_max = elong.hi;
  const auto dil = range_from<double>(p.at("dilation"), "pruning.dilation");
  c.pruning.dilation_min = dil.lo;
  c.pruning.dilation_max = dil.hi;

  const auto& ma = j.at("microaneurysm");
  c.microaneurysm.base_probability = ma.at("base_probability").get<double>();
  c.microaneurysm.severity_coupling = ma.at("severity_coupling").get<double>();
  c.microaneurysm.local_coupling = ma.at("local_coupling").get<double>();
  const auto ma_band = range_from<double>(ma.at("band"), "microaneurysm.band");
  c.microaneurysm.band_min = ma_band.lo;
  c.microaneurysm.band_max = ma_band.hi;
  c.microaneurysm.reference_area = ma.at("reference_area").get<double>();
  const auto cluster = range_from<int>(ma.at("cluster_size"), "microaneurysm.cluster_size");
  c.microaneurysm.cluster_min = cluster.lo;
  c.microaneurysm.cluster_max = cluster.hi;

  const auto& nv = j.at("neovascular");
  c.neovascular.group_base = nv.at("group_base").get<double>();
  c.neovascular.group_gain = nv.at("group_gain").get<double>();
  c.neovascular.persistence_weight = nv.at("persistence_weight").get<double>();
  c.neovascular.radial_weight = nv.at("radial_weight").get<double>();
  c.neovascular.swirl_weight = nv.at("swirl_weight").get<double>();
  c.neovascular.jitter_std = nv.at("jitter_std").get<double>();
  c.neovascular.containment = nv.at("containment").get<double>();
  c.neovascular.start_ratio = nv.at("start_ratio").get<double>();
  c.neovascular.end_ratio = nv.at("end_ratio").get<double>();
  c.neovascular.max_attempts = nv.at("max_attempts").get<int>();
}

json raster_json(const RasterConfig& r) {
  return {{"resolution", r.resolution},         {"supersample", r.supersample},
          {"threshold", r.threshold},           {"base_intensity", r.base_intensity},
          {"bright_radius", r.bright_radius},   {"min_radius_px", r.min_radius_px}};
}

void read_raster(const json& j, RasterConfig& r) {
  r.resolution = j.at("resolution").get<int>();
  r.supersample = j.at("supersample").get<int>();
  r.threshold = j.at("threshold").get<double>();
  r.base_intensity = j.at("base_intensity").get<double>();
  r.bright_radius = j.at("bright_radius").get<double>();
  r.min_radius_px = j.at("min_radius_px").get<double>();
}

json teacher_json(const TeacherEndpointConfig& t) {
  return {{"mode", to_string(t.mode)},
          {"base_url", t.base_url},
          {"path", t.path},
          {"model", t.model},
          {"token_env", t.token_env},
          {"timeout_seconds", t.timeout_seconds},
          {"max_retries", t.max_retries},
          {"temperature", t.temperature},
          {"response_pointer", t.response_pointer},
          {"attach_image", t.attach_image},
          {"max_in_flight", t.max_in_flight}};
}

void read_teacher(const json& j, TeacherEndpointConfig& t) {
  t.mode = parse_teacher_mode(j.at("mode").get<std::string>());
  t.base_url = j.at("base_url").get<std::string>();
  t.path = j.at("path").get<std::string>();
  t.model = j.at("model").get<std::string>();
  t.token_env = j.at("token_env").get<std::string>();
  t.timeout_seconds = j.at("timeout_seconds").get<double>();
  t.max_retries = j.at("max_retries").get<int>();
  t.temperature = j.at("temperature").get<double>();
  t.response_pointer = j.at("response_pointer").get<std::string>();
  t.attach_image = j.at("attach_image").get<bool>();
  t.max_in_flight = j.at("max_in_flight").get<int>();
}

}  // namespace

void PathologyRanges::validate() const {
  auto probability = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  probability(healthy_fraction, "healthy_fraction");
  probability(nv_probability, "nv_probability");
  if (healthy_fraction + nv_probability > 1.0)
    throw ConfigError("healthy_fraction + nv_probability must not exceed 1");

  check_range(dropout_count, "dropout_count");
  check_range(dropout_radius, "dropout_radius");
  check_range(dropout_strength, "dropout_strength");
  check_range(dropout_exponent, "dropout_exponent");
  check_range(dropout_noise_gain, "dropout_noise_gain");
  check_range(dropout_distance, "dropout_distance");
  check_range(dropout_aspect, "dropout_aspect");
  check_range(harmonic_amplitude, "harmonic_amplitude");
  check_range(noise_frequency, "noise_frequency");
  check_range(ma_radius_mm, "ma_radius_mm");
  check_range(ma_length_factor, "ma_length_factor");
  check_range(nv_severity, "nv_severity");
  check_range(nv_footprint, "nv_footprint");
  check_range(nv_length, "nv_length");
  check_range(tortuosity_gain, "tortuosity_gain");
  check_range(drop_fraction_clamp, "drop_fraction_clamp");

  if (dropout_count.lo < 0) throw ConfigError("dropout_count must be non-negative");
  if (nv_probability > 0.0 && dropout_count.hi < 1)
    throw ConfigError("neovascularization needs dropout_count upper bound >= 1");
  if (!(dropout_radius.lo > 0.0)) throw ConfigError("dropout_radius must be positive");
  if (!(dropout_strength.lo >= 0.0 && dropout_strength.hi <= 1.0))
    throw ConfigError("dropout_strength must lie in [0, 1]");
  if (!(dropout_exponent.lo > 0.0)) throw ConfigError("dropout_exponent must be positive");
  if (!(dropout_noise_gain.lo >= 0.0)) throw ConfigError("dropout_noise_gain must be non-negative");
  if (!(dropout_distance.lo >= 0.0)) throw ConfigError("dropout_distance must be non-negative");
  if (!(dropout_aspect.lo > 0.0)) throw ConfigError("dropout_aspect must be positive");
  // Three harmonics of this size keep the boundary factor positive.
  if (!(harmonic_amplitude.lo >= 0.0 && harmonic_amplitude.hi < 1.0 / 3.0))
    throw ConfigError("harmonic_amplitude must lie in [0, 1/3)");
  if (!(noise_frequency.lo >= 0.0)) throw ConfigError("noise_frequency must be non-negative");
  if (noise_components < 0) throw ConfigError("noise_components must be non-negative");
  if (!(ma_radius_mm.lo > 0.0)) throw ConfigError("ma_radius_mm must be positive");
  if (!(ma_length_factor.lo > 0.0)) throw ConfigError("ma_length_factor must be positive");
  if (!(nv_severity.lo >= 0.0 && nv_severity.hi <= 1.0))
    throw ConfigError("nv_severity must lie in [0, 1]");
  if (!(nv_footprint.lo > 0.0)) throw ConfigError("nv_footprint must be positive");
  if (nv_length.lo < 1) throw ConfigError("nv_length must be at least 1");
  if (!(tortuosity_gain.lo >= 0.0 && tortuosity_gain.hi <= 1.0))
    throw ConfigError("tortuosity_gain must lie in [0, 1]");
  if (!(tortuosity_band_min >= 0.0 && tortuosity_band_min < tortuosity_band_max &&
        tortuosity_band_max <= 1.0))
    throw ConfigError("tortuosity_band must satisfy 0 <= min < max <= 1");
  if (!(drop_fraction_clamp.lo >= 0.0 && drop_fraction_clamp.hi <= 1.0))
    throw ConfigError("drop_fraction_clamp must lie in [0, 1]");
}

void GeneratorConfig::validate() const {
  domain.validate();
  growth.validate();
  if (!(faz.radius > 0.0 && faz.jitter_radius >= 0.0 && faz.max_shift >= 0.0))
    throw ConfigError("FAZ radius must be positive and jitter bounds non-negative");
  pruning.validate();
  ranges.validate();

  MicroaneurysmConfig ma = microaneurysm;
  ma.radius_min_mm = ranges.ma_radius_mm.lo;
  ma.radius_max_mm = ranges.ma_radius_mm.hi;
  ma.length_factor = ranges.ma_length_factor.lo;
  ma.step = growth.step;
  ma.mm_per_unit = domain.mm_per_unit;
  ma.validate();

  NeovascularConfig nv = neovascular;
  nv.severity = ranges.nv_severity.hi;
  nv.footprint = ranges.nv_footprint.lo;
  nv.length_min = ranges.nv_length.lo;
  nv.length_max = ranges.nv_length.hi;
  nv.validate();

  raster.validate();
  teacher.validate();
  if (run.parallel < 1) throw ConfigError("run.parallel must be at least 1");
}

nlohmann::json config_to_json(const GeneratorConfig& config, bool include_parallel) {
  json run{{"diversify", config.run.diversify}};
  if (include_parallel) run["parallel"] = config.run.parallel;
  return {{"growth", growth_json(config)},
          {"pathology_ranges", pathology_json(config)},
          {"raster", raster_json(config.raster)},
          {"text", {{"mode", to_string(config.text.mode)}}},
          {"teacher", teacher_json(config.teacher)},
          {"run", std::move(run)}};
}

GeneratorConfig config_from_json(const nlohmann::json& doc) {
  json merged = config_to_json(GeneratorConfig{});
  merge_strict(merged, doc, "");
  GeneratorConfig config;
  try {
    read_growth(merged.at("growth"), config);
    read_pathology(merged.at("pathology_ranges"), config);
    read_raster(merged.at("raster"), config.raster);
    config.text.mode = parse_conversation_mode(merged.at("text").at("mode").get<std::string>());
    read_teacher(merged.at("teacher"), config.teacher);
    config.run.diversify = merged.at("run").at("diversify").get<bool>();
    config.run.parallel = merged.at("run").at("parallel").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  config.raster.mm_per_unit = config.domain.mm_per_unit;
  config.validate();
  return config;
}

GeneratorConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  const json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError(path.string() + " is not valid JSON");
  return config_from_json(doc);
}

std::string config_digest(const GeneratorConfig& config) {
  const std::string payload = std::string(kGeneratorVersion) + "\n" + config_to_json(config, false).dump();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(payload.data(), payload.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

}  // namespace svr
