#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svr/annotate.hpp"
#include "svr/config.hpp"
#include "svr/diversify.hpp"
#include "svr/forest.hpp"
#include "svr/raster.hpp"

namespace svr {

enum class ProfileClass { healthy, nonproliferative, proliferative };

/// Pathology parameters drawn for one sample.
struct PathologyProfile {
  std::vector<DropoutRegion> dropout;
  /// False for all-absent profiles.
  bool microaneurysms = false;
  double ma_length_factor = 0.0;
  std::optional<NeovascularConfig> neovascular;
  TortuosityConfig tortuosity;
  double drop_fraction = 0.0;

  bool all_absent() const { return dropout.empty() && !microaneurysms && !neovascular && tortuosity.gain == 0.0; }
};

/// One uniform draw decides the class of profile: NV with probability
/// nv_probability, all-absent with probability healthy_fraction, otherwise
/// non-proliferative. Every sampled value lies in its configured range.
PathologyProfile sample_profile(const GeneratorConfig& config, const FazGeometry& faz, Rng& rng);

/// Profile of a given class, drawing only the class-specific parameters.
PathologyProfile sample_profile(const GeneratorConfig& config, const FazGeometry& faz, Rng& rng,
                                ProfileClass cls);

/// splitmix64(master + (index + 1) * golden gamma). Stable across runs and
/// independent of generation order.
std::uint64_t derive_sample_seed(std::uint64_t master_seed, std::uint64_t index);

/// Seven-digit zero-padded id.
std::string sample_id(std::uint64_t index);

struct SampleBundle {
  std::string id;
  std::uint64_t seed = 0;
  FazGeometry faz;
  PathologyProfile profile;
  VesselForest forest;
  PathologyRecord record;
  SampleMetadata metadata;
  /// Empty when rendering was skipped.
  VesselMap map;
  std::string template_text;
  std::string question;
  RewriteResult rewrite;
  bool diversified = false;
  ConversationRecord conversation;
};

struct SampleOptions {
  bool render = true;
  /// Used only when the configuration enables diversification.
  TeacherClient* teacher = nullptr;
  /// Overrides the sampled profile class.
  std::optional<ProfileClass> force_class;
};

/// Runs the full per-sample sequence: FAZ, growth, pruning, remodelling,
/// microaneurysms, neovascularization, tortuosity, rendering, metadata,
/// template text, optional rewrite, conversation record. Deterministic in
/// (index, seed, config) when the teacher is off or mocked.
SampleBundle generate_sample(std::uint64_t index, std::uint64_t seed, const GeneratorConfig& config,
                             const SampleOptions& options = {});

/// Encoded image and mask PNGs of a rendered bundle.
std::vector<std::uint8_t> encode_image(const SampleBundle& bundle);
std::vector<std::uint8_t> encode_mask(const SampleBundle& bundle);

/// Per-sample metadata document, including the restart record.
nlohmann::json sample_document(const SampleBundle& bundle, const std::string& digest);

struct DatasetRequest {
  std::uint64_t count = 1;
  std::uint64_t master_seed = 0;
  std::filesystem::path out_dir;
};

struct DatasetReport {
  std::uint64_t generated = 0;
  /// Samples found complete from an earlier run.
  std::uint64_t skipped = 0;
  std::vector<std::string> failed;
  std::vector<std::string> errors;
  std::uint64_t fallbacks = 0;
  nlohmann::json manifest;
};

/// Writes images/, masks/, meta/, conversations.jsonl and finally
/// manifest.json under the output directory. Samples whose metadata already
/// records the same (id, seed, digest) are kept. Output bytes do not depend
/// on `config.run.parallel`.
DatasetReport generate_dataset(const DatasetRequest& request, const GeneratorConfig& config);

/// Checks structural, pathology and text invariants on one bundle. Returns
/// human-readable problems; empty means valid.
std::vector<std::string> check_sample_invariants(const SampleBundle& bundle, const GeneratorConfig& config);

struct ValidationReport {
  std::uint64_t samples = 0;
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

/// Re-simulates every manifest row from its seed and the embedded
/// configuration, compares file bytes and reruns the invariant checks.
ValidationReport validate_dataset(const std::filesystem::path& out_dir, int parallel = 1);

}  // namespace svr
