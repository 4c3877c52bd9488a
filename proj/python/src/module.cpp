// Python bindings. Structured values cross the boundary as JSON text; the
// pure-Python layer in svr/__init__.py turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "svr/config.hpp"
#include "svr/diversify.hpp"
#include "svr/pipeline.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

svr::GeneratorConfig parse_config(const std::string& text) {
  if (text.empty()) return {};
  const json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw svr::ConfigError("configuration is not valid JSON");
  return svr::config_from_json(doc);
}

std::optional<svr::ProfileClass> parse_class(const std::optional<std::string>& name) {
  if (!name) return std::nullopt;
  if (*name == "healthy") return svr::ProfileClass::healthy;
  if (*name == "nonproliferative") return svr::ProfileClass::nonproliferative;
  if (*name == "proliferative") return svr::ProfileClass::proliferative;
  throw svr::ConfigError("unknown profile class '" + *name + "'");
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

}  // namespace

PYBIND11_MODULE(_svr, m) {
  m.doc() = "Synthetic OCTA vasculature generator (native core)";
  py::register_exception<svr::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("version", [] { return std::string(svr::kGeneratorVersion); });
  m.def("default_config_json", [] { return svr::config_to_json(svr::GeneratorConfig{}).dump(); });
  m.def("normalize_config_json", [](const std::string& text) { return svr::config_to_json(parse_config(text)).dump(); });
  m.def("config_digest", [](const std::string& text) { return svr::config_digest(parse_config(text)); });
  m.def("derive_sample_seed", &svr::derive_sample_seed, py::arg("master_seed"), py::arg("index"));
  m.def("sample_id", &svr::sample_id, py::arg("index"));

  m.def(
      "generate_sample",
      [](std::uint64_t index, std::uint64_t seed, const std::string& config_text, bool render,
         const std::optional<std::string>& force_class) {
        const auto config = parse_config(config_text);
        svr::SampleOptions options;
        options.render = render;
        options.force_class = parse_class(force_class);
        std::optional<svr::TeacherClient> teacher;
        if (config.run.diversify) {
          teacher.emplace(config.teacher);
          options.teacher = &*teacher;
        }
        svr::SampleBundle bundle;
        {
          py::gil_scoped_release release;
          bundle = svr::generate_sample(index, seed, config, options);
        }
        const auto doc = svr::sample_document(bundle, svr::config_digest(config)).dump();
        const auto problems = svr::check_sample_invariants(bundle, config);
        py::object image = py::none(), mask = py::none();
        if (render) {
          image = to_bytes(svr::encode_image(bundle));
          mask = to_bytes(svr::encode_mask(bundle));
        }
        return py::make_tuple(doc, image, mask, problems);
      },
      py::arg("index"), py::arg("seed"), py::arg("config_json") = "", py::arg("render") = true,
      py::arg("force_class") = py::none());

  m.def(
      "generate_dataset",
      [](std::uint64_t count, std::uint64_t seed, const std::string& out, const std::string& config_text) {
        const auto config = parse_config(config_text);
        svr::DatasetReport report;
        {
          py::gil_scoped_release release;
          report = svr::generate_dataset({count, seed, out}, config);
        }
        return json{{"generated", report.generated}, {"skipped", report.skipped},     {"failed", report.failed},
                    {"errors", report.errors},       {"fallbacks", report.fallbacks}, {"manifest", report.manifest}}
            .dump();
      },
      py::arg("count"), py::arg("seed"), py::arg("out"), py::arg("config_json") = "");

  m.def(
      "validate_dataset",
      [](const std::string& out, int parallel) {
        svr::ValidationReport report;
        {
          py::gil_scoped_release release;
          report = svr::validate_dataset(out, parallel);
        }
        return py::make_tuple(report.samples, report.problems);
      },
      py::arg("out"), py::arg("parallel") = 1);

  m.def(
      "template_reasoning",
      [](const std::string& metadata_json, bool with_diagnosis) {
        return svr::template_reasoning(svr::metadata_from_json(json::parse(metadata_json)), with_diagnosis);
      },
      py::arg("metadata_json"), py::arg("with_diagnosis") = false);

  m.def(
      "verify_fact_preservation",
      [](const std::string& metadata_json, const std::string& text) {
        std::vector<std::tuple<std::string, std::string>> out;
        for (const auto& v : svr::verify_fact_preservation(svr::metadata_from_json(json::parse(metadata_json)), text))
          out.emplace_back(svr::to_string(v.kind), v.detail);
        return out;
      },
      py::arg("metadata_json"), py::arg("text"));
}
