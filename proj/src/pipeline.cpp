#include "svr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "svr/png_io.hpp"

namespace svr {

namespace {

using nlohmann::json;

// Stream salts, one per stage, so adding draws to one stage never shifts
// another.
enum Stream : std::uint64_t { kFaz = 1, kGrowth, kProfile, kPrune, kRemodel, kMicroaneurysm, kNeovascular, kTortuosity };

constexpr double kTwoPi = 2.0 * kPi;

double draw(const Range<double>& r, Rng& rng) { return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi); }

int draw(const Range<int>& r, Rng& rng) { return static_cast<int>(rng.uniform_int(r.lo, r.hi)); }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

DropoutRegion sample_region(const PathologyRanges& ranges, const FazGeometry& faz, Rng& rng) {
  DropoutRegion region;
  const double dist = draw(ranges.dropout_distance, rng);
  const double angle = rng.uniform(0.0, kTwoPi);
  region.center = {clamp01(faz.center.x + dist * std::cos(angle)),
                   clamp01(faz.center.y + dist * std::sin(angle))};
  region.radius = draw(ranges.dropout_radius, rng);
  // Aspect ratio split evenly between the axes keeps the area near pi r^2.
  const double aspect = std::sqrt(draw(ranges.dropout_aspect, rng));
  region.axis_a = aspect;
  region.axis_b = 1.0 / aspect;
  for (int mode : {2, 3, 5})
    region.harmonics.push_back({mode, draw(ranges.harmonic_amplitude, rng), rng.uniform(0.0, kTwoPi)});
  region.exponent = draw(ranges.dropout_exponent, rng);
  region.noise_gain = draw(ranges.dropout_noise_gain, rng);
  region.strength = draw(ranges.dropout_strength, rng);
  for (int k = 0; k < ranges.noise_components; ++k) {
    const double f = draw(ranges.noise_frequency, rng);
    const double a = rng.uniform(0.0, kTwoPi);
    region.noise.push_back({{f * std::cos(a), f * std::sin(a)}, rng.uniform(0.0, kTwoPi), rng.uniform(0.5, 1.0)});
  }
  return region;
}

PathologyProfile sample_profile_of(const GeneratorConfig& config, const FazGeometry& faz, Rng& rng,
                                   ProfileClass cls) {
  const auto& ranges = config.ranges;
  PathologyProfile profile;
  profile.tortuosity.band_min = ranges.tortuosity_band_min;
  profile.tortuosity.band_max = ranges.tortuosity_band_max;
  if (cls == ProfileClass::healthy) return profile;

  const bool nv = cls == ProfileClass::proliferative;
  // A tuft needs a lesion to grow into.
  const int count = draw(Range<int>{nv ? std::max(1, ranges.dropout_count.lo) : ranges.dropout_count.lo,
                                    ranges.dropout_count.hi},
                         rng);
  for (int k = 0; k < count; ++k) profile.dropout.push_back(sample_region(ranges, faz, rng));

  profile.microaneurysms = true;
  profile.ma_length_factor = draw(ranges.ma_length_factor, rng);

  if (nv) {
    NeovascularConfig cfg = config.neovascular;
    cfg.severity = draw(ranges.nv_severity, rng);
    cfg.footprint = draw(ranges.nv_footprint, rng);
    cfg.length_min = ranges.nv_length.lo;
    cfg.length_max = ranges.nv_length.hi;
    profile.neovascular = cfg;
  }

  profile.tortuosity.gain = draw(ranges.tortuosity_gain, rng);

  double smax = 0.0;
  for (const auto& r : profile.dropout) smax = std::max(smax, r.strength);
  profile.drop_fraction =
      profile.dropout.empty() ? 0.0 : std::clamp(smax, ranges.drop_fraction_clamp.lo, ranges.drop_fraction_clamp.hi);
  return profile;
}

ProfileClass draw_class(const PathologyRanges& ranges, Rng& rng) {
  const double u = rng.uniform();
  if (u < ranges.nv_probability) return ProfileClass::proliferative;
  if (u < ranges.nv_probability + ranges.healthy_fraction) return ProfileClass::healthy;
  return ProfileClass::nonproliferative;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a sibling temporary and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string_view as_chars(const std::vector<std::uint8_t>& bytes) {
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

std::string document_text(const json& doc) { return doc.dump(2) + "\n"; }

std::string image_path(const std::string& id) { return "images/" + id + ".png"; }
std::string mask_path(const std::string& id) { return "masks/" + id + ".png"; }
std::string meta_path(const std::string& id) { return "meta/" + id + ".json"; }

/// Runs `body(i)` for i in [0, count) on `workers` threads.
template <class Body>
void parallel_for(std::uint64_t count, int workers, Body&& body) {
  const auto n = static_cast<std::uint64_t>(std::max(1, workers));
  if (n == 1 || count <= 1) {
    for (std::uint64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::vector<std::thread> pool;
  for (std::uint64_t w = 0; w < std::min(n, count); ++w)
    pool.emplace_back([&] {
      for (std::uint64_t i = next++; i < count; i = next++) body(i);
    });
  for (auto& t : pool) t.join();
}

std::size_t count_label_words(std::string_view text) {
  std::size_t n = 0;
  std::string word;
  auto flush = [&] {
    if (word == "Healthy" || word == "NPDR" || word == "PDR") ++n;
    word.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      word += c;
    else
      flush();
  }
  flush();
  return n;
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

PathologyProfile sample_profile(const GeneratorConfig& config, const FazGeometry& faz, Rng& rng) {
  return sample_profile_of(config, faz, rng, draw_class(config.ranges, rng));
}

PathologyProfile sample_profile(const GeneratorConfig& config, const FazGeometry& faz, Rng& rng,
                                ProfileClass cls) {
  return sample_profile_of(config, faz, rng, cls);
}

std::uint64_t derive_sample_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(master_seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

std::string sample_id(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%07llu", static_cast<unsigned long long>(index));
  return buf;
}

SampleBundle generate_sample(std::uint64_t index, std::uint64_t seed, const GeneratorConfig& config,
                             const SampleOptions& options) {
  SampleBundle b;
  b.id = sample_id(index);
  b.seed = seed;
  try {
    Rng master(seed);
    Rng faz_rng = master.fork(kFaz);
    Rng growth_rng = master.fork(kGrowth);
    Rng profile_rng = master.fork(kProfile);
    Rng prune_rng = master.fork(kPrune);
    Rng remodel_rng = master.fork(kRemodel);
    Rng ma_rng = master.fork(kMicroaneurysm);
    Rng nv_rng = master.fork(kNeovascular);
    Rng tort_rng = master.fork(kTortuosity);

    b.faz = config.faz;
    b.faz.center = sample_faz_center(config.faz.jitter_radius, config.faz.max_shift, faz_rng);

    ProfileClass cls = draw_class(config.ranges, profile_rng);
    if (options.force_class) cls = *options.force_class;
    b.profile = sample_profile_of(config, b.faz, profile_rng, cls);

    b.forest = grow_forest(config.domain, config.growth, b.faz, growth_rng);

    const double kappa = config.growth.kappa;
    b.record.field = DropoutField(b.profile.dropout);
    b.record.tortuosity = b.profile.tortuosity;
    if (!b.record.field.empty()) {
      PruningConfig pruning = config.pruning;
      pruning.drop_fraction = b.profile.drop_fraction;
      b.record.pruned_leaves = prune_capillaries(b.forest, b.record.field, pruning, kappa, prune_rng);
      remodel_survivors(b.forest, b.record.field, pruning, config.domain, b.faz, kappa, remodel_rng);

      if (b.profile.microaneurysms) {
        MicroaneurysmConfig ma = config.microaneurysm;
        ma.radius_min_mm = config.ranges.ma_radius_mm.lo;
        ma.radius_max_mm = config.ranges.ma_radius_mm.hi;
        ma.length_factor = b.profile.ma_length_factor;
        ma.step = config.growth.step;
        ma.mm_per_unit = config.domain.mm_per_unit;
        b.record.microaneurysms = spawn_microaneurysms(b.forest, b.record.field, ma, ma_rng);
      }
      if (b.profile.neovascular)
        b.record.tufts = grow_nv_tufts(b.forest, b.record.field, b.faz, *b.profile.neovascular, nv_rng);
      if (b.profile.tortuosity.gain > 0.0)
        b.record.tortuosity_affected =
            apply_tortuosity(b.forest, b.record.field, b.profile.tortuosity, config.growth.step, b.faz, tort_rng);
    }

    if (options.render) {
      RasterConfig raster = config.raster;
      raster.mm_per_unit = config.domain.mm_per_unit;
      b.map = rasterize(b.forest, Appendages{b.record.microaneurysms, b.record.tufts}, raster);
    }

    b.metadata = extract_metadata(b.faz, b.record, config.domain.mm_per_unit);
    b.template_text = template_reasoning(b.metadata);
    b.question = std::string(question_for_sample(seed, config.run.diversify));

    std::string reasoning = b.template_text;
    if (config.run.diversify && options.teacher) {
      RewriteRequest request;
      request.image_ref = image_path(b.id);
      request.compact_metadata = compact_metadata_json(b.metadata);
      request.original_text = b.template_text;
      request.style_seed = seed;
      if (options.teacher->config().attach_image && options.render) request.image_png = encode_image(b);
      b.rewrite = options.teacher->rewrite(request, b.metadata);
      b.diversified = true;
      reasoning = b.rewrite.text;
    }
    b.conversation =
        build_conversation(b.id, image_path(b.id), b.metadata, reasoning, config.text.mode, seed, b.question);
  } catch (const std::exception& e) {
    throw std::runtime_error("sample " + b.id + ": " + e.what());
  }
  return b;
}

std::vector<std::uint8_t> encode_image(const SampleBundle& b) {
  return encode_png_gray8(b.map.width, b.map.height, to_gray8(b.map.intensity));
}

std::vector<std::uint8_t> encode_mask(const SampleBundle& b) {
  std::vector<std::uint8_t> pixels(b.map.mask.size());
  std::transform(b.map.mask.begin(), b.map.mask.end(), pixels.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  return encode_png_gray8(b.map.width, b.map.height, pixels);
}

nlohmann::json sample_document(const SampleBundle& b, const std::string& digest) {
  json doc;
  doc["id"] = b.id;
  doc["seed"] = b.seed;
  doc["record"] = {{"id", b.id},
                   {"seed", b.seed},
                   {"config_digest", digest},
                   {"generator_version", std::string(kGeneratorVersion)}};
  doc["label"] = to_string(b.metadata.label);
  doc["metadata"] = metadata_to_json(b.metadata);
  doc["text"] = {{"template", b.template_text}, {"question", b.conversation.question}, {"answer", b.conversation.answer}};
  doc["teacher"] = {{"diversified", b.diversified},
                    {"fallback", b.rewrite.fallback},
                    {"attempts", b.rewrite.attempts},
                    {"failure", b.rewrite.failure}};
  doc["graph"] = {{"nodes", b.forest.size()}, {"segments", b.forest.edges().size()}};
  doc["files"] = {{"image", image_path(b.id)}, {"mask", mask_path(b.id)}};
  doc["conversation"] = b.conversation.to_json();
  return doc;
}

DatasetReport generate_dataset(const DatasetRequest& request, const GeneratorConfig& config) {
  if (request.count < 1) throw ConfigError("sample count must be at least 1");
  config.validate();
  namespace fs = std::filesystem;
  const fs::path& out = request.out_dir;
  for (const char* sub : {"images", "masks", "meta"}) fs::create_directories(out / sub);

  const std::string digest = config_digest(config);
  std::unique_ptr<TeacherClient> teacher;
  if (config.run.diversify) teacher = std::make_unique<TeacherClient>(config.teacher);

  struct Row {
    bool ok = false;
    bool skipped = false;
    std::string label;
    bool fallback = false;
    std::string conversation;
    std::string error;
  };
  std::vector<Row> rows(request.count);

  parallel_for(request.count, config.run.parallel, [&](std::uint64_t i) {
    Row& row = rows[i];
    const std::string id = sample_id(i);
    const std::uint64_t seed = derive_sample_seed(request.master_seed, i);
    const fs::path meta_file = out / meta_path(id);
    try {
      if (fs::exists(meta_file) && fs::exists(out / image_path(id)) && fs::exists(out / mask_path(id))) {
        const json doc = json::parse(read_file(meta_file), nullptr, false);
        if (!doc.is_discarded() && doc.contains("record") && doc["record"].value("id", "") == id &&
            doc["record"].value("seed", std::uint64_t{0}) == seed &&
            doc["record"].value("config_digest", "") == digest) {
          row.ok = row.skipped = true;
          row.label = doc.at("label").get<std::string>();
          row.fallback = doc.at("teacher").at("fallback").get<bool>();
          row.conversation = doc.at("conversation").dump();
          return;
        }
      }
      SampleOptions options;
      options.teacher = teacher.get();
      const SampleBundle bundle = generate_sample(i, seed, config, options);
      write_atomic(out / image_path(id), as_chars(encode_image(bundle)));
      write_atomic(out / mask_path(id), as_chars(encode_mask(bundle)));
      const json doc = sample_document(bundle, digest);
      // Metadata goes last: its presence marks the sample complete.
      write_atomic(meta_file, document_text(doc));
      row.ok = true;
      row.label = to_string(bundle.metadata.label);
      row.fallback = bundle.rewrite.fallback;
      row.conversation = bundle.conversation.to_json().dump();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  DatasetReport report;
  std::string jsonl;
  json samples = json::array();
  std::map<std::string, std::uint64_t> summary{{"Healthy", 0}, {"NPDR", 0}, {"PDR", 0}};
  for (std::uint64_t i = 0; i < request.count; ++i) {
    const Row& row = rows[i];
    const std::string id = sample_id(i);
    if (!row.ok) {
      report.failed.push_back(id);
      report.errors.push_back(row.error);
      continue;
    }
    (row.skipped ? report.skipped : report.generated)++;
    if (row.fallback) ++report.fallbacks;
    ++summary[row.label];
    jsonl += row.conversation + "\n";
    samples.push_back({{"id", id},
                       {"seed", derive_sample_seed(request.master_seed, i)},
                       {"label", row.label},
                       {"image", image_path(id)},
                       {"mask", mask_path(id)},
                       {"meta", meta_path(id)},
                       {"fallback", row.fallback}});
  }
  write_atomic(out / "conversations.jsonl", jsonl);

  json manifest;
  manifest["generator_version"] = std::string(kGeneratorVersion);
  manifest["master_seed"] = request.master_seed;
  manifest["count"] = request.count;
  manifest["config_digest"] = digest;
  manifest["config"] = config_to_json(config, false);
  manifest["summary"] = summary;
  manifest["fallbacks"] = report.fallbacks;
  manifest["failed"] = report.failed;
  manifest["samples"] = std::move(samples);
  write_atomic(out / "manifest.json", document_text(manifest));
  report.manifest = std::move(manifest);
  return report;
}

std::vector<std::string> check_sample_invariants(const SampleBundle& b, const GeneratorConfig& config) {
  std::vector<std::string> problems;
  auto fail = [&](std::string what) { problems.push_back(b.id + ": " + std::move(what)); };
  const auto nodes = b.forest.nodes();
  const auto n = static_cast<NodeId>(nodes.size());

  // Forest structure: consistent parent/child links, every node reaches a root.
  for (NodeId id = 0; id < n; ++id) {
    const auto& node = nodes[static_cast<std::size_t>(id)];
    if (!node.is_root()) {
      if (node.parent < 0 || node.parent >= n) {
        fail("node " + std::to_string(id) + " has an invalid parent");
        continue;
      }
      const auto& kids = nodes[static_cast<std::size_t>(node.parent)].children;
      if (kids[0] != id && kids[1] != id) fail("node " + std::to_string(id) + " is missing from its parent");
    }
    NodeId cursor = id;
    for (NodeId steps = 0; cursor != kNoNode && steps <= n; ++steps) cursor = nodes[static_cast<std::size_t>(cursor)].parent;
    if (cursor != kNoNode) fail("node " + std::to_string(id) + " lies on a cycle");
  }

  // Branching law at growth bifurcations.
  for (NodeId id = 0; id < n; ++id) {
    const auto kids = b.forest.growth_children(id);
    if (kids.size() != 2) continue;
    const double kappa = config.growth.kappa;
    const double lhs = std::pow(nodes[static_cast<std::size_t>(id)].radius, kappa);
    const double rhs = std::pow(b.forest.node(kids[0]).radius, kappa) + std::pow(b.forest.node(kids[1]).radius, kappa);
    if (std::abs(lhs - rhs) > 1e-6 * rhs) fail("bifurcation " + std::to_string(id) + " violates the branching law");
  }

  for (const auto& ma : b.record.microaneurysms)
    if (!config.ranges.ma_radius_mm.contains(ma.radius_mm)) fail("microaneurysm radius out of range");

  for (const auto& tuft : b.record.tufts) {
    if (tuft.steps() < config.ranges.nv_length.lo || tuft.steps() > config.ranges.nv_length.hi)
      fail("neovascular tuft step count out of range");
    auto check_polyline = [&](const std::vector<Vec2>& pts, Vec2 start) {
      Vec2 prev = start;
      for (Vec2 p : pts) {
        if (!(b.record.field.value(p) > 0.0)) fail("neovascular point outside dropout");
        if (distance(p, b.faz.center) < b.faz.radius) fail("neovascular point inside the FAZ");
        if (std::abs(distance(prev, p) - tuft.step_length) > 1e-9) fail("neovascular step length mismatch");
        prev = p;
      }
    };
    if (!tuft.main.empty())
      check_polyline(std::vector<Vec2>(tuft.main.begin() + 1, tuft.main.end()), tuft.main.front());
    for (std::size_t s = 0; s < tuft.sides.size(); ++s) {
      const auto& side = tuft.sides[s];
      if (side.empty() || side.front() != tuft.main.at(static_cast<std::size_t>(tuft.side_anchors.at(s))))
        fail("neovascular side branch detached from its anchor");
      else
        check_polyline(std::vector<Vec2>(side.begin() + 1, side.end()), side.front());
    }
  }

  if (b.metadata.label != derive_label(b.metadata)) fail("label does not follow the label rule");

  // Text contract.
  const std::string& answer = b.conversation.answer;
  if (answer.empty()) fail("empty answer");
  const std::string lower = lowercase(answer);
  for (const auto& term : eye_dependent_terms())
    if (lower.find(term) != std::string::npos) fail("eye-dependent term '" + term + "' in answer");
  const bool template_based = !b.diversified || b.rewrite.fallback || config.teacher.mode == TeacherMode::mock;
  if (template_based) {
    std::size_t last = 0;
    bool ordered = true;
    for (const char* term : {"faz", "dropout", "microaneurysm", "neovascular", "tortuosity"}) {
      const auto at = lower.find(term);
      if (at == std::string::npos || at < last) ordered = false;
      if (at != std::string::npos) last = at;
    }
    if (!ordered) fail("clauses are not in FAZ, dropout, MA, NV, tortuosity order");
  }
  const std::size_t labels = count_label_words(answer);
  if (config.text.mode == ConversationMode::finetune) {
    const std::string tail = diagnosis_sentence(b.metadata.label);
    if (labels != 1 || !answer.ends_with(tail)) fail("finetune answer must end with exactly one label");
  } else if (labels != 0) {
    fail("pretrain answer carries a label");
  }

  if (!b.map.mask.empty() && b.map.mask_area() == 0) fail("empty vessel mask");
  return problems;
}

ValidationReport validate_dataset(const std::filesystem::path& out, int parallel) {
  ValidationReport report;
  std::mutex mu;
  auto problem = [&](std::string what) {
    std::lock_guard lock(mu);
    report.problems.push_back(std::move(what));
  };

  json manifest;
  GeneratorConfig config;
  try {
    manifest = json::parse(read_file(out / "manifest.json"));
    config = config_from_json(manifest.at("config"));
  } catch (const std::exception& e) {
    report.problems.push_back(std::string("manifest: ") + e.what());
    return report;
  }
  const std::string digest = config_digest(config);
  if (manifest.value("config_digest", "") != digest) problem("manifest: config digest mismatch");
  if (manifest.value("generator_version", "") != kGeneratorVersion) problem("manifest: generator version mismatch");
  const auto master = manifest.at("master_seed").get<std::uint64_t>();
  const auto& rows = manifest.at("samples");
  if (rows.size() != manifest.at("count").get<std::uint64_t>()) problem("manifest: row count differs from requested count");
  if (!manifest.at("failed").empty()) problem("manifest: run recorded failed samples");
  report.samples = rows.size();

  std::unique_ptr<TeacherClient> mock;
  if (config.run.diversify && config.teacher.mode == TeacherMode::mock) mock = std::make_unique<TeacherClient>(config.teacher);

  std::vector<std::string> conversations(rows.size());
  std::vector<std::string> labels(rows.size());
  parallel_for(rows.size(), parallel, [&](std::uint64_t r) {
    const auto& row = rows[r];
    try {
      const std::string id = row.at("id").get<std::string>();
      const std::uint64_t index = std::stoull(id);
      const std::uint64_t seed = row.at("seed").get<std::uint64_t>();
      if (seed != derive_sample_seed(master, index)) problem(id + ": seed does not match the master seed");

      const std::string stored_meta = read_file(out / row.at("meta").get<std::string>());
      const json stored = json::parse(stored_meta);
      conversations[r] = stored.at("conversation").dump();
      labels[r] = stored.at("label").get<std::string>();
      if (labels[r] != row.at("label").get<std::string>()) problem(id + ": manifest label differs from metadata");

      SampleOptions options;
      options.teacher = mock.get();
      const SampleBundle bundle = generate_sample(index, seed, config, options);
      json regenerated = sample_document(bundle, digest);
      const bool remote = stored.at("teacher").at("diversified").get<bool>() && config.teacher.mode == TeacherMode::http;
      if (remote) {
        // A live teacher is not reproducible; keep its text and verify it instead.
        for (const char* key : {"text", "teacher", "conversation"}) regenerated[key] = stored.at(key);
        std::string body = stored.at("text").at("answer").get<std::string>();
        if (config.text.mode == ConversationMode::finetune) {
          const std::string tail = " " + diagnosis_sentence(bundle.metadata.label);
          if (body.ends_with(tail)) body.resize(body.size() - tail.size());
        }
        for (const auto& v : verify_fact_preservation(bundle.metadata, body))
          problem(id + ": teacher text violation " + to_string(v.kind) + " (" + v.detail + ")");
      }
      if (document_text(regenerated) != stored_meta) problem(id + ": metadata differs from re-simulation");
      if (read_file(out / row.at("image").get<std::string>()) != as_chars(encode_image(bundle)))
        problem(id + ": image differs from re-simulation");
      if (read_file(out / row.at("mask").get<std::string>()) != as_chars(encode_mask(bundle)))
        problem(id + ": mask differs from re-simulation");

      SampleBundle checked = bundle;
      if (remote) {
        checked.conversation.answer = stored.at("text").at("answer").get<std::string>();
        checked.diversified = true;
      }
      for (auto& p : check_sample_invariants(checked, config)) problem(std::move(p));
    } catch (const std::exception& e) {
      problem(std::string("sample row ") + std::to_string(r) + ": " + e.what());
    }
  });

  std::string jsonl;
  for (const auto& line : conversations) jsonl += line + "\n";
  try {
    if (read_file(out / "conversations.jsonl") != jsonl) problem("conversations.jsonl differs from per-sample records");
  } catch (const std::exception& e) {
    problem(e.what());
  }

  std::map<std::string, std::uint64_t> recount{{"Healthy", 0}, {"NPDR", 0}, {"PDR", 0}};
  for (const auto& l : labels)
    if (!l.empty()) ++recount[l];
  if (json(recount) != manifest.at("summary")) problem("manifest: label summary differs from recount");
  std::sort(report.problems.begin(), report.problems.end());
  return report;
}

}  // namespace svr
