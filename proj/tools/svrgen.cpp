// Command-line front end: generate, inspect and validate datasets.
#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "svr/config.hpp"
#include "svr/pipeline.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kPartialFailure = 1;
constexpr int kConfigError = 2;

int run_generate(std::uint64_t count, std::uint64_t seed, const std::string& config_path,
                 const std::string& out, std::optional<int> parallel, bool diversify,
                 std::optional<double> healthy_fraction) {
  svr::GeneratorConfig config;
  try {
    nlohmann::json doc = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw svr::ConfigError("cannot read configuration file " + config_path);
      doc = nlohmann::json::parse(in, nullptr, false);
      if (doc.is_discarded()) throw svr::ConfigError(config_path + " is not valid JSON");
    }
    if (parallel) doc["run"]["parallel"] = *parallel;
    if (diversify) doc["run"]["diversify"] = true;
    if (healthy_fraction) doc["pathology_ranges"]["healthy_fraction"] = *healthy_fraction;
    config = svr::config_from_json(doc);
    if (count < 1) throw svr::ConfigError("--count must be at least 1");
  } catch (const svr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  const svr::DatasetReport report = svr::generate_dataset({count, seed, out}, config);
  std::cout << "generated " << report.generated << ", reused " << report.skipped << ", failed "
            << report.failed.size() << ", teacher fallbacks " << report.fallbacks << "\n";
  const auto& summary = report.manifest.at("summary");
  std::cout << "labels: Healthy " << summary.at("Healthy") << ", NPDR " << summary.at("NPDR") << ", PDR "
            << summary.at("PDR") << "\n";
  for (std::size_t i = 0; i < report.failed.size(); ++i)
    std::cerr << "failed " << report.failed[i] << ": " << report.errors[i] << "\n";
  return report.failed.empty() ? kOk : kPartialFailure;
}

int run_inspect(const std::string& id, const std::string& out) {
  const auto path = std::filesystem::path(out) / "meta" / (id + ".json");
  std::ifstream in(path);
  if (!in) {
    std::cerr << "no metadata for sample " << id << " under " << out << "\n";
    return kPartialFailure;
  }
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    std::cerr << path.string() << " is not valid JSON\n";
    return kPartialFailure;
  }
  std::cout << "id: " << doc.at("id").get<std::string>() << "\nseed: " << doc.at("seed") << "\nlabel: "
            << doc.at("label").get<std::string>() << "\n\nmetadata:\n"
            << doc.at("metadata").dump(2) << "\n\nquestion:\n"
            << doc.at("text").at("question").get<std::string>() << "\n\nanswer:\n"
            << doc.at("text").at("answer").get<std::string>() << "\n";
  return kOk;
}

int run_validate(const std::string& out, int parallel) {
  const svr::ValidationReport report = svr::validate_dataset(out, parallel);
  for (const auto& p : report.problems) std::cerr << p << "\n";
  if (!report.ok()) {
    std::cout << "validation failed: " << report.problems.size() << " problem(s) over " << report.samples
              << " samples\n";
    return kPartialFailure;
  }
  std::cout << "validation passed: " << report.samples << " samples\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic OCTA vasculature dataset generator"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Generate a dataset");
  std::uint64_t count = 0;
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out;
  std::optional<int> parallel;
  bool diversify = false;
  std::optional<double> healthy_fraction;
  gen->add_option("--count", count, "Number of samples")->required();
  gen->add_option("--seed", seed, "Master seed")->required();
  gen->add_option("--config", config_path, "Configuration JSON (defaults when omitted)");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--parallel", parallel, "Worker threads");
  gen->add_flag("--diversify", diversify, "Rewrite reasoning through the teacher and vary the question");
  gen->add_option("--healthy-fraction", healthy_fraction, "Share of pathology-free samples");

  auto* inspect = app.add_subcommand("inspect", "Print one sample's metadata and text");
  std::string id;
  inspect->add_option("--id", id, "Seven-digit sample id")->required();
  inspect->add_option("--out", out, "Dataset directory")->required();

  auto* validate = app.add_subcommand("validate", "Re-simulate a dataset and check its invariants");
  int validate_parallel = 1;
  validate->add_option("--out", out, "Dataset directory")->required();
  validate->add_option("--parallel", validate_parallel, "Worker threads")->check(CLI::PositiveNumber);

  auto* defaults = app.add_subcommand("defaults", "Print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) return run_generate(count, seed, config_path, out, parallel, diversify, healthy_fraction);
    if (*inspect) return run_inspect(id, out);
    if (*validate) return run_validate(out, validate_parallel);
    if (*defaults) {
      std::cout << svr::config_to_json(svr::GeneratorConfig{}).dump(2) << "\n";
      return kOk;
    }
  } catch (const svr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPartialFailure;
  }
  return kOk;
}
