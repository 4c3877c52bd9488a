#include "svr/annotate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace svr {

namespace {

constexpr Vec2 kImageCenter{0.5, 0.5};

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

const char* zone_phrase(Zone zone) {
  switch (zone) {
    case Zone::center: return "near the center";
    case Zone::left: return "on the left";
    case Zone::right: return "on the right";
    case Zone::up: return "toward the top";
    case Zone::down: return "toward the bottom";
    case Zone::upper_left: return "in the upper-left";
    case Zone::upper_right: return "in the upper-right";
    case Zone::lower_left: return "in the lower-left";
    case Zone::lower_right: return "in the lower-right";
  }
  return "";
}

const char* shift_phrase(Zone zone) {
  switch (zone) {
    case Zone::center: return "";
    case Zone::left: return "to the left";
    case Zone::right: return "to the right";
    case Zone::up: return "up";
    case Zone::down: return "down";
    case Zone::upper_left: return "toward the upper-left";
    case Zone::upper_right: return "toward the upper-right";
    case Zone::lower_left: return "toward the lower-left";
    case Zone::lower_right: return "toward the lower-right";
  }
  return "";
}

const char* band_phrase(DistanceBand band) {
  switch (band) {
    case DistanceBand::adjacent_to_faz: return "adjacent to the FAZ";
    case DistanceBand::mid_field: return "in the mid-field";
    case DistanceBand::peripheral: return "in the periphery";
  }
  return "";
}

std::string count_noun(std::size_t n, const char* singular, const char* plural) {
  return std::to_string(n) + " " + (n == 1 ? singular : plural);
}

std::string join(const std::vector<std::string>& parts, const char* separator) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += separator;
    out += parts[i];
  }
  return out;
}

/// "3 in the upper-left and 1 on the right", most frequent zone first.
std::string zone_tally(const std::vector<Vec2>& points, const FazGeometry& faz) {
  std::map<Zone, std::size_t> counts;
  for (Vec2 p : points) ++counts[localize(p, faz).zone];
  std::vector<std::pair<Zone, std::size_t>> order(counts.begin(), counts.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> parts;
  for (const auto& [zone, n] : order) parts.push_back(std::to_string(n) + " " + zone_phrase(zone));
  if (parts.size() <= 2) return join(parts, " and ");
  const std::string last = parts.back();
  parts.pop_back();
  return join(parts, ", ") + " and " + last;
}

nlohmann::json point_json(Vec2 p) { return nlohmann::json::array({p.x, p.y}); }

Vec2 point_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("metadata: expected [x, y]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

nlohmann::json metadata_body(const SampleMetadata& m) {
  nlohmann::json doc;
  doc["faz"] = {{"center", point_json(m.faz_center)}, {"radius", m.faz_radius}};
  auto dropout = nlohmann::json::array();
  for (const auto& d : m.dropout)
    dropout.push_back({{"center", point_json(d.center)},
                       {"effective_radius", d.effective_radius},
                       {"strength", d.strength},
                       {"mean_c", d.mean_value}});
  doc["dropout"] = std::move(dropout);
  auto mas = nlohmann::json::array();
  for (const auto& ma : m.microaneurysms)
    mas.push_back({{"center", point_json(ma.center)}, {"radius_mm", ma.radius_mm}});
  doc["microaneurysms"] = std::move(mas);
  auto nvs = nlohmann::json::array();
  for (const auto& nv : m.neovascularization)
    nvs.push_back({{"origin", point_json(nv.origin)},
                   {"point_count", nv.point_count},
                   {"footprint_radius", nv.footprint_radius}});
  doc["neovascularization"] = std::move(nvs);
  doc["tortuosity"] = {{"gain", m.tortuosity.gain},
                       {"band", {m.tortuosity.band_min, m.tortuosity.band_max}},
                       {"affected_nodes", m.tortuosity.affected_nodes}};
  doc["pruned_leaves"] = m.pruned_leaves;
  doc["label"] = to_string(m.label);
  return doc;
}

}  // namespace

const char* to_string(Label label) {
  switch (label) {
    case Label::healthy: return "Healthy";
    case Label::npdr: return "NPDR";
    case Label::pdr: return "PDR";
  }
  return "";
}

Label parse_label(std::string_view text) {
  if (text == "Healthy") return Label::healthy;
  if (text == "NPDR") return Label::npdr;
  if (text == "PDR") return Label::pdr;
  throw std::invalid_argument("unknown label: " + std::string(text));
}

const char* to_string(Zone zone) {
  switch (zone) {
    case Zone::center: return "center";
    case Zone::left: return "left";
    case Zone::right: return "right";
    case Zone::up: return "up";
    case Zone::down: return "down";
    case Zone::upper_left: return "upper-left";
    case Zone::upper_right: return "upper-right";
    case Zone::lower_left: return "lower-left";
    case Zone::lower_right: return "lower-right";
  }
  return "";
}

const char* to_string(DistanceBand band) {
  switch (band) {
    case DistanceBand::adjacent_to_faz: return "adjacent";
    case DistanceBand::mid_field: return "mid-field";
    case DistanceBand::peripheral: return "peripheral";
  }
  return "";
}

std::string LocalizationPhrase::text() const {
  return std::string(zone_phrase(zone)) + ", " + band_phrase(band);
}

Zone compass_zone(Vec2 offset) {
  // Sectors are 45 degrees wide and centred on the axes; compare slopes
  // against tan(22.5 deg) rather than computing an angle.
  const double tan_half = std::tan(kPi / 8.0);
  const double dx = offset.x;
  const double up = -offset.y;
  if (dx == 0.0 && up == 0.0) return Zone::center;
  if (std::abs(up) <= tan_half * std::abs(dx)) return dx > 0 ? Zone::right : Zone::left;
  if (std::abs(dx) <= tan_half * std::abs(up)) return up > 0 ? Zone::up : Zone::down;
  if (up > 0) return dx > 0 ? Zone::upper_right : Zone::upper_left;
  return dx > 0 ? Zone::lower_right : Zone::lower_left;
}

LocalizationPhrase localize(Vec2 point, const FazGeometry& faz) {
  const double d = distance(point, faz.center);
  LocalizationPhrase phrase;
  phrase.zone = d <= faz.radius + 0.05 ? Zone::center : compass_zone(point - kImageCenter);
  phrase.band = d <= 0.15   ? DistanceBand::adjacent_to_faz
                : d <= 0.30 ? DistanceBand::mid_field
                            : DistanceBand::peripheral;
  return phrase;
}

FazGeometry SampleMetadata::faz() const {
  FazGeometry g;
  g.center = faz_center;
  g.radius = faz_radius;
  return g;
}

SampleMetadata extract_metadata(const FazGeometry& faz, const PathologyRecord& record,
                                double mm_per_unit) {
  SampleMetadata m;
  m.faz_center = faz.center;
  m.faz_radius = faz.radius;
  m.mm_per_unit = mm_per_unit;
  for (const auto& region : record.field.regions())
    m.dropout.push_back({region.center, std::sqrt(region_area(region) / kPi), region.strength,
                         region_mean_value(region)});
  for (const auto& ma : record.microaneurysms) m.microaneurysms.push_back({ma.center, ma.radius_mm});
  for (const auto& tuft : record.tufts) {
    NeovascularSummary nv;
    nv.origin = tuft.main.empty() ? Vec2{} : tuft.main.front();
    // The origin is the existing vessel tip; count the sprouted points only.
    nv.point_count = tuft.steps();
    for (const auto& side : tuft.sides) nv.point_count += static_cast<int>(side.size());
    for (Vec2 p : tuft.main) nv.footprint_radius = std::max(nv.footprint_radius, distance(p, nv.origin));
    for (const auto& side : tuft.sides)
      for (Vec2 p : side) nv.footprint_radius = std::max(nv.footprint_radius, distance(p, nv.origin));
    m.neovascularization.push_back(nv);
  }
  m.tortuosity = {record.tortuosity.gain, record.tortuosity.band_min, record.tortuosity.band_max,
                  record.tortuosity_affected};
  m.pruned_leaves = record.pruned_leaves;
  m.label = derive_label(m);
  return m;
}

Label derive_label(const SampleMetadata& m) {
  if (!m.neovascularization.empty()) return Label::pdr;
  if (!m.dropout.empty() || !m.microaneurysms.empty() || m.tortuosity.present()) return Label::npdr;
  return Label::healthy;
}

nlohmann::json metadata_to_json(const SampleMetadata& m) {
  auto doc = metadata_body(m);
  doc["units"] = {{"coordinates", "normalized, x right, y down"}, {"mm_per_unit", m.mm_per_unit}};
  return doc;
}

SampleMetadata metadata_from_json(const nlohmann::json& doc) {
  SampleMetadata m;
  const auto& faz = doc.at("faz");
  m.faz_center = point_from(faz.at("center"));
  m.faz_radius = faz.at("radius").get<double>();
  if (doc.contains("units")) m.mm_per_unit = doc.at("units").at("mm_per_unit").get<double>();
  for (const auto& d : doc.at("dropout"))
    m.dropout.push_back({point_from(d.at("center")), d.at("effective_radius").get<double>(),
                         d.at("strength").get<double>(), d.at("mean_c").get<double>()});
  for (const auto& ma : doc.at("microaneurysms"))
    m.microaneurysms.push_back({point_from(ma.at("center")), ma.at("radius_mm").get<double>()});
  for (const auto& nv : doc.at("neovascularization"))
    m.neovascularization.push_back({point_from(nv.at("origin")), nv.at("point_count").get<int>(),
                                    nv.at("footprint_radius").get<double>()});
  const auto& t = doc.at("tortuosity");
  m.tortuosity.gain = t.at("gain").get<double>();
  m.tortuosity.band_min = t.at("band").at(0).get<double>();
  m.tortuosity.band_max = t.at("band").at(1).get<double>();
  m.tortuosity.affected_nodes = t.at("affected_nodes").get<std::size_t>();
  m.pruned_leaves = doc.at("pruned_leaves").get<std::size_t>();
  m.label = parse_label(doc.at("label").get<std::string>());
  return m;
}

std::string compact_metadata_json(const SampleMetadata& m) { return metadata_body(m).dump(); }

const std::vector<std::string>& eye_dependent_terms() {
  static const std::vector<std::string> terms{"superior", "inferior", "temporal", "nasal"};
  return terms;
}

std::string diagnosis_sentence(Label label) {
  return std::string("Final diagnosis: ") + to_string(label) + ".";
}

std::string template_reasoning(const SampleMetadata& m, bool with_diagnosis) {
  const FazGeometry faz = m.faz();
  std::vector<std::string> clauses;

  {
    const Vec2 shift = m.faz_center - kImageCenter;
    const std::string where = norm(shift) < 0.01
                                  ? "at the image center"
                                  : std::string("shifted slightly ") + shift_phrase(compass_zone(shift)) +
                                        " from the image center";
    clauses.push_back("The foveal avascular zone (FAZ) is a round vessel-free area " + where +
                      " with a radius of about " + fixed(m.faz_radius * m.mm_per_unit, 2) +
                      " mm.");
  }

  if (m.dropout.empty()) {
    clauses.push_back("No capillary dropout is observed.");
  } else {
    std::vector<std::string> parts;
    for (const auto& d : m.dropout) {
      const char* size = d.effective_radius < 0.22 ? "small" : d.effective_radius < 0.28 ? "moderate" : "large";
      parts.push_back(std::string("a ") + size + " area " + localize(d.center, faz).text());
    }
    clauses.push_back("Capillary dropout is present in " +
                      count_noun(m.dropout.size(), "region", "regions") + ": " + join(parts, "; ") +
                      ".");
  }

  if (m.microaneurysms.empty()) {
    clauses.push_back("No microaneurysms are seen.");
  } else {
    std::vector<Vec2> centers;
    double largest = 0.0;
    for (const auto& ma : m.microaneurysms) {
      centers.push_back(ma.center);
      largest = std::max(largest, ma.radius_mm);
    }
    const bool one = centers.size() == 1;
    clauses.push_back(std::string(one ? "One microaneurysm is" : "Microaneurysms are") +
                      " visible along capillaries at the lesion margins (" +
                      zone_tally(centers, faz) + "), up to " + fixed(largest * 1000.0, 0) +
                      " um in radius.");
  }

  if (m.neovascularization.empty()) {
    clauses.push_back("No neovascular tufts are observed.");
  } else {
    std::vector<Vec2> origins;
    for (const auto& nv : m.neovascularization) origins.push_back(nv.origin);
    clauses.push_back("Neovascular tufts sprout into the nonperfused area at " +
                      count_noun(origins.size(), "site", "sites") + " (" + zone_tally(origins, faz) +
                      ").");
  }

  if (m.tortuosity.present()) {
    std::vector<Vec2> centers;
    for (const auto& d : m.dropout) centers.push_back(d.center);
    std::string clause = "Vessel tortuosity is increased along the lesion borders";
    if (!centers.empty()) clause += " (" + zone_tally(centers, faz) + " lesion)";
    clauses.push_back(clause + ".");
  } else {
    clauses.push_back("Vessel tortuosity is not increased.");
  }

  if (with_diagnosis) clauses.push_back(diagnosis_sentence(m.label));
  return join(clauses, " ");
}

const char* to_string(ConversationMode mode) {
  return mode == ConversationMode::pretrain ? "pretrain" : "finetune";
}

ConversationMode parse_conversation_mode(std::string_view text) {
  if (text == "pretrain") return ConversationMode::pretrain;
  if (text == "finetune") return ConversationMode::finetune;
  throw std::invalid_argument("unknown conversation mode: " + std::string(text));
}

nlohmann::json ConversationRecord::to_json() const {
  return {{"id", id},       {"image", image},           {"question", question},
          {"answer", answer}, {"label", svr::to_string(label)}, {"seed", seed}};
}

ConversationRecord build_conversation(std::string id, std::string image_ref,
                                      const SampleMetadata& metadata, const std::string& reasoning,
                                      ConversationMode mode, std::uint64_t seed,
                                      std::string_view question) {
  ConversationRecord record;
  record.id = std::move(id);
  record.image = std::move(image_ref);
  record.question = std::string(kImageToken) + "\n" + std::string(question);
  record.answer = reasoning;
  if (mode == ConversationMode::finetune) record.answer += " " + diagnosis_sentence(metadata.label);
  record.label = metadata.label;
  record.seed = seed;
  return record;
}

}  // namespace svr
