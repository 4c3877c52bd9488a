#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "svr/geometry.hpp"
#include "svr/growth.hpp"
#include "svr/pathology.hpp"

namespace svr {

enum class Label { healthy, npdr, pdr };

const char* to_string(Label label);
/// Accepts "Healthy", "NPDR" or "PDR"; throws std::invalid_argument otherwise.
Label parse_label(std::string_view text);

/// Absolute image zones. Image convention: x grows to the right, y grows
/// downward, so "up" means smaller y.
enum class Zone { center, left, right, up, down, upper_left, upper_right, lower_left, lower_right };
enum class DistanceBand { adjacent_to_faz, mid_field, peripheral };

const char* to_string(Zone zone);
const char* to_string(DistanceBand band);

struct LocalizationPhrase {
  Zone zone = Zone::center;
  DistanceBand band = DistanceBand::adjacent_to_faz;

  /// e.g. "in the upper-left, adjacent to the FAZ".
  std::string text() const;
  bool operator==(const LocalizationPhrase&) const = default;
};

/// Eight-way compass sector of an offset given in image coordinates.
Zone compass_zone(Vec2 offset);

/// Zone `center` within the FAZ radius + 0.05 of the FAZ centre, otherwise the
/// compass sector of the point about the image centre. Distance band from the
/// FAZ centre with cut-offs 0.15 and 0.30.
LocalizationPhrase localize(Vec2 point, const FazGeometry& faz);

struct DropoutSummary {
  Vec2 center;
  double effective_radius = 0.0;
  double strength = 0.0;
  double mean_value = 0.0;
};

struct MicroaneurysmSummary {
  Vec2 center;
  double radius_mm = 0.0;
};

struct NeovascularSummary {
  Vec2 origin;
  int point_count = 0;
  double footprint_radius = 0.0;
};

struct TortuositySummary {
  double gain = 0.0;
  double band_min = 0.30;
  double band_max = 0.75;
  std::size_t affected_nodes = 0;

  /// Reported only when the gain is visible and something actually moved.
  bool present() const { return gain > 0.05 && affected_nodes > 0; }
};

/// Ground truth for one sample, exported as JSON and turned into text.
struct SampleMetadata {
  Vec2 faz_center{0.5, 0.5};
  double faz_radius = 0.08;
  double mm_per_unit = 3.0;
  std::vector<DropoutSummary> dropout;
  std::vector<MicroaneurysmSummary> microaneurysms;
  std::vector<NeovascularSummary> neovascularization;
  TortuositySummary tortuosity;
  std::size_t pruned_leaves = 0;
  Label label = Label::healthy;

  FazGeometry faz() const;
};

/// Everything the pathology pass produced for one sample.
struct PathologyRecord {
  DropoutField field;
  std::size_t pruned_leaves = 0;
  std::vector<MicroaneurysmRecord> microaneurysms;
  std::vector<NeovascularTuft> tufts;
  TortuosityConfig tortuosity;
  std::size_t tortuosity_affected = 0;
};

/// Summarises a pathology record; the label is derived, not copied.
SampleMetadata extract_metadata(const FazGeometry& faz, const PathologyRecord& record,
                                double mm_per_unit);

/// PDR with any neovascularization; NPDR with dropout, microaneurysms or
/// visible tortuosity; Healthy otherwise.
Label derive_label(const SampleMetadata& metadata);

nlohmann::json metadata_to_json(const SampleMetadata& metadata);
SampleMetadata metadata_from_json(const nlohmann::json& doc);
/// Metadata without unit annotations, serialized on a single line.
std::string compact_metadata_json(const SampleMetadata& metadata);

/// Canonical terms used to detect each pathology in free text.
struct PathologyTerms {
  static constexpr std::string_view dropout = "dropout";
  static constexpr std::string_view microaneurysm = "microaneurysm";
  static constexpr std::string_view neovascular = "neovascular";
  static constexpr std::string_view tortuosity = "tortuosity";
};

/// Terms that tie directions to eye laterality and must never appear.
const std::vector<std::string>& eye_dependent_terms();

std::string diagnosis_sentence(Label label);

/// Five clauses in fixed order (FAZ, dropout, microaneurysms,
/// neovascularization, tortuosity); optionally followed by the diagnosis.
std::string template_reasoning(const SampleMetadata& metadata, bool with_diagnosis = false);

enum class ConversationMode { pretrain, finetune };

const char* to_string(ConversationMode mode);
ConversationMode parse_conversation_mode(std::string_view text);

inline constexpr std::string_view kImageToken = "<image>";
inline constexpr std::string_view kTrainingQuestion =
    "What features are visible in this OCTA image? Please first describe the image features, "
    "then inspect it for signs of diabetic retinopathy (DR) and classify it as Healthy, NPDR, or "
    "PDR.";

struct ConversationRecord {
  std::string id;
  std::string image;
  /// Image token, newline, then the question text.
  std::string question;
  std::string answer;
  Label label = Label::healthy;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

/// Single-turn record. In finetune mode the diagnosis sentence is appended
/// to the reasoning.
ConversationRecord build_conversation(std::string id, std::string image_ref,
                                      const SampleMetadata& metadata, const std::string& reasoning,
                                      ConversationMode mode, std::uint64_t seed,
                                      std::string_view question = kTrainingQuestion);

}  // namespace svr
