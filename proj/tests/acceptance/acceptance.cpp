// Acceptance drill: one PASS/FAIL line per criterion.
//
//   svr_acceptance                 run every criterion
//   svr_acceptance --criterion N   run only criterion N

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "fake_teacher.hpp"
#include "support.hpp"
#include "svr/config.hpp"
#include "svr/pathology.hpp"
#include "svr/pipeline.hpp"

using namespace svr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int number;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

bool is_growth_bifurcation(const VesselForest& f, NodeId id) { return f.growth_children(id).size() == 2; }

Outcome murray_audit() {
  const GeneratorConfig cfg;
  SampleOptions opt;
  opt.render = false;
  std::size_t checked = 0;
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto b = generate_sample(i, derive_sample_seed(1001, i), cfg, opt);
    const auto& f = b.forest;
    for (std::size_t n = 0; n < f.size(); ++n) {
      const auto id = static_cast<NodeId>(n);
      if (!is_growth_bifurcation(f, id)) continue;
      const auto kids = f.growth_children(id);
      const double r1 = f.node(kids[0]).radius, r2 = f.node(kids[1]).radius;
      const double want = std::pow(std::pow(r1, cfg.growth.kappa) + std::pow(r2, cfg.growth.kappa), 1.0 / cfg.growth.kappa);
      worst = std::max(worst, std::abs(f.node(id).radius - want) / want);
      ++checked;
    }
  }
  return {checked > 0 && worst <= 1e-6,
          std::to_string(checked) + " bifurcations, worst relative error " + num(worst)};
}

Outcome dropout_bounds() {
  const GeneratorConfig cfg;
  Rng rng(2002);
  std::size_t evaluations = 0, out_of_range = 0;
  while (evaluations < 1000000) {
    FazGeometry faz;
    faz.center = sample_faz_center(faz.jitter_radius, faz.max_shift, rng);
    const auto profile = sample_profile(cfg, faz, rng, ProfileClass::proliferative);
    const DropoutField field(profile.dropout);
    for (int k = 0; k < 10000; ++k, ++evaluations) {
      const double c = field.value({rng.uniform(-0.1, 1.1), rng.uniform(-0.1, 1.1)});
      if (!(c >= 0.0 && c <= 1.0)) ++out_of_range;
    }
  }
  const auto circle = test::circle_region({0.5, 0.5}, 0.25);
  const bool centre_one = inside_score(circle, {0.5, 0.5}) == 1.0;
  const bool edge_zero = inside_score(circle, {0.75, 0.5}) == 0.0 && inside_score(circle, {0.5, 0.75}) == 0.0;
  auto shaped = circle;
  shaped.harmonics = {{3, 0.07, 0.3}};
  const double theta = 1.1;
  const double rt = modulated_radius(shaped, theta);
  const bool edge_zero_modulated = inside_score_polar(shaped, rt, theta) == 0.0;
  auto flat = circle;
  flat.noise = {{{4.0, 3.0}, 0.2, 0.9}};
  const double centre = region_value(flat, flat.center);
  const bool pass = out_of_range == 0 && centre_one && edge_zero && edge_zero_modulated && std::abs(centre - 0.75) < 1e-15;
  return {pass, std::to_string(evaluations) + " evaluations, " + std::to_string(out_of_range) +
                    " out of range, g=0 centre value " + num(centre)};
}

Outcome pruning_statistics() {
  // Twenty one-segment trees so each leaf's fate is independent of topology.
  VesselForest base;
  std::vector<Vec2> leaves;
  for (int i = 0; i < 20; ++i) {
    const double a = 2.0 * kPi * i / 20;
    const double rho = 0.02 + 0.011 * i;
    const Vec2 p{0.5 + rho * std::cos(a), 0.5 + rho * std::sin(a)};
    const NodeId root = base.add_root({p.x + 0.005, p.y, 0.04}, 0.01, VesselKind::arterial, Layer::superficial, {-1, 0, 0});
    base.add_child(root, {p.x, p.y, 0.04}, 0.002 + 0.0003 * (i % 5));
    leaves.push_back(p);
  }
  const DropoutField field({test::saturated_region({0.5, 0.5}, 0.6)});
  PruningConfig cfg;
  cfg.drop_fraction = 0.5;
  std::vector<double> weights;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const double c = field.value(leaves[i]);
    if (c < cfg.regression_threshold) return {false, "toy leaf outside the regressing core"};
    weights.push_back(pruning_weight(c, base.node(static_cast<NodeId>(2 * i + 1)).radius, cfg));
  }
  const auto exact = test::exact_inclusion(weights, 10);

  const int runs = 10000;
  std::vector<int> removed(leaves.size(), 0);
  for (int r = 0; r < runs; ++r) {
    auto f = base;
    Rng rng(derive_sample_seed(3003, static_cast<std::uint64_t>(r)));
    prune_capillaries(f, field, cfg, 3.0, rng);
    for (const auto& t : f.trees())
      if (f.node(t.root).child_count() == 0) ++removed[static_cast<std::size_t>(&t - f.trees().data())];
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < leaves.size(); ++i)
    worst = std::max(worst, std::abs(removed[i] / double(runs) - exact[i]));
  const auto [lo, hi] = std::minmax_element(exact.begin(), exact.end());
  return {worst < 0.02, "inclusion probabilities " + num(*lo) + ".." + num(*hi) +
                            ", worst absolute deviation " + num(worst)};
}

Outcome range_reproduction() {
  const GeneratorConfig cfg;
  const auto& r = cfg.ranges;
  Rng rng(4004);
  const int draws = 10000;
  int nv = 0;
  std::size_t violations = 0, values = 0;
  auto in = [&](bool ok) {
    ++values;
    if (!ok) ++violations;
  };
  const double tol = 1e-12;
  for (int i = 0; i < draws; ++i) {
    FazGeometry faz = cfg.faz;
    faz.center = sample_faz_center(faz.jitter_radius, faz.max_shift, rng);
    const auto p = sample_profile(cfg, faz, rng);
    in(r.dropout_count.contains(static_cast<int>(p.dropout.size())));
    for (const auto& d : p.dropout) {
      in(r.dropout_radius.contains(d.radius));
      in(r.dropout_strength.contains(d.strength));
      in(r.dropout_exponent.contains(d.exponent));
      in(r.dropout_noise_gain.contains(d.noise_gain));
      const double aspect = d.axis_a / d.axis_b;
      in(aspect >= r.dropout_aspect.lo - tol && aspect <= r.dropout_aspect.hi + tol);
      const double dist = distance(d.center, faz.center);
      const bool clamped = d.center.x <= 0.0 || d.center.x >= 1.0 || d.center.y <= 0.0 || d.center.y >= 1.0;
      if (!clamped) in(dist >= r.dropout_distance.lo - tol && dist <= r.dropout_distance.hi + tol);
      for (const auto& h : d.harmonics) in(r.harmonic_amplitude.contains(h.amplitude));
      in(static_cast<int>(d.noise.size()) == r.noise_components);
      for (const auto& n : d.noise) {
        const double f = norm(n.frequency);
        in(f >= r.noise_frequency.lo - tol && f <= r.noise_frequency.hi + tol);
      }
    }
    if (p.microaneurysms) in(r.ma_length_factor.contains(p.ma_length_factor));
    if (p.neovascular) {
      ++nv;
      in(r.nv_severity.contains(p.neovascular->severity));
      in(r.nv_footprint.contains(p.neovascular->footprint));
      in(p.neovascular->length_min == r.nv_length.lo && p.neovascular->length_max == r.nv_length.hi);
    }
    if (!p.all_absent()) in(r.tortuosity_gain.contains(p.tortuosity.gain));
    if (!p.dropout.empty()) in(r.drop_fraction_clamp.contains(p.drop_fraction));
  }
  const double rate = nv / double(draws);
  return {violations == 0 && std::abs(rate - 0.4) <= 0.02,
          std::to_string(values) + " values checked, " + std::to_string(violations) + " out of range, NV rate " +
              num(rate)};
}

Outcome ma_radius_compliance() {
  const GeneratorConfig cfg;
  SampleOptions opt;
  opt.render = false;
  std::size_t total = 0, bad = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    opt.force_class = i % 2 ? ProfileClass::proliferative : ProfileClass::nonproliferative;
    const auto b = generate_sample(i, derive_sample_seed(5005, i), cfg, opt);
    for (const auto& ma : b.metadata.microaneurysms) {
      ++total;
      if (ma.radius_mm < 0.01 || ma.radius_mm > 0.08) ++bad;
    }
  }
  return {total > 0 && bad == 0, std::to_string(total) + " microaneurysms, " + std::to_string(bad) + " outside [0.01, 0.08] mm"};
}

Outcome tortuosity_bound() {
  const GeneratorConfig cfg;
  std::size_t moved = 0;
  double worst = 0.0;
  bool topology = true;
  for (std::uint64_t i = 0; i < 20; ++i) {
    Rng rng(derive_sample_seed(6006, i));
    FazGeometry faz = cfg.faz;
    faz.center = sample_faz_center(faz.jitter_radius, faz.max_shift, rng);
    auto forest = grow_forest(cfg.domain, cfg.growth, faz, rng);
    const auto profile = sample_profile(cfg, faz, rng, ProfileClass::proliferative);
    const DropoutField field(profile.dropout);
    const auto edges = forest.edges();
    std::vector<Vec3> before;
    for (const auto& n : forest.nodes()) before.push_back(n.position);
    TortuosityConfig tort = profile.tortuosity;
    tort.gain = 0.5;
    moved += apply_tortuosity(forest, field, tort, 0.01, faz, rng);
    for (std::size_t n = 0; n < forest.size(); ++n) worst = std::max(worst, distance(forest.nodes()[n].position, before[n]));
    topology = topology && forest.edges() == edges && forest.size() == before.size();
  }
  return {moved > 0 && worst <= 0.35 * 0.5 * 0.01 && topology,
          std::to_string(moved) + " nodes displaced, max displacement " + num(worst) +
              (topology ? ", adjacency unchanged" : ", adjacency CHANGED")};
}

Outcome nv_containment() {
  const GeneratorConfig cfg;
  SampleOptions opt;
  opt.render = false;
  opt.force_class = ProfileClass::proliferative;
  std::size_t tufts = 0, points = 0, bad_points = 0, bad_steps = 0, bad_counts = 0;
  for (std::uint64_t i = 0; i < 150; ++i) {
    const auto b = generate_sample(i, derive_sample_seed(7007, i), cfg, opt);
    for (const auto& t : b.record.tufts) {
      ++tufts;
      if (t.steps() < 3 || t.steps() > 6) ++bad_counts;
      auto check_line = [&](const std::vector<Vec2>& line, std::size_t first) {
        for (std::size_t k = first; k < line.size(); ++k) {
          ++points;
          if (!(b.record.field.value(line[k]) > 0.0) || b.faz.contains(line[k])) ++bad_points;
          if (k > 0 && std::abs(distance(line[k], line[k - 1]) - t.step_length) > 1e-9) ++bad_steps;
        }
      };
      check_line(t.main, 0);
      // Side branches start at their anchor on the main sprout.
      for (const auto& side : t.sides) check_line(side, 1);
    }
  }
  return {tufts > 0 && bad_points == 0 && bad_steps == 0 && bad_counts == 0,
          std::to_string(tufts) + " tufts, " + std::to_string(points) + " points; " + std::to_string(bad_points) +
              " uncontained, " + std::to_string(bad_steps) + " bad steps, " + std::to_string(bad_counts) +
              " bad step counts"};
}

std::size_t count_word(const std::string& text, const std::string& word) {
  std::size_t n = 0;
  for (auto pos = text.find(word); pos != std::string::npos; pos = text.find(word, pos + 1)) {
    const bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(text[pos - 1]));
    const auto end = pos + word.size();
    const bool right = end == text.size() || !std::isalnum(static_cast<unsigned char>(text[end]));
    n += left && right;
  }
  return n;
}

Outcome text_contract() {
  const GeneratorConfig cfg;
  SampleOptions opt;
  opt.render = false;
  std::size_t order = 0, blocked = 0, labels = 0, invariant = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto b = generate_sample(i, derive_sample_seed(8008, i), cfg, opt);
    const auto& m = b.metadata;
    const std::string& a = b.conversation.answer;
    // First mention of each present finding, in the required order.
    std::vector<std::size_t> at{a.find("FAZ")};
    if (!m.dropout.empty()) at.push_back(a.find("dropout is present"));
    if (!m.microaneurysms.empty()) at.push_back(a.find("visible along capillaries"));
    if (!m.neovascularization.empty()) at.push_back(a.find("Neovascular tufts sprout"));
    if (m.tortuosity.present()) at.push_back(a.find("tortuosity is increased"));
    if (std::find(at.begin(), at.end(), std::string::npos) != at.end() || !std::is_sorted(at.begin(), at.end())) ++order;
    std::string lowered = a;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const auto& term : eye_dependent_terms())
      if (lowered.find(term) != std::string::npos) ++blocked;
    const auto tokens = count_word(a, "Healthy") + count_word(a, "NPDR") + count_word(a, "PDR");
    const auto tail = diagnosis_sentence(m.label);
    if (tokens != 1 || a.size() < tail.size() || a.compare(a.size() - tail.size(), tail.size(), tail) != 0) ++labels;
    if (!check_sample_invariants(b, cfg).empty()) ++invariant;
  }
  return {order == 0 && blocked == 0 && labels == 0 && invariant == 0,
          "1000 answers: " + std::to_string(order) + " order faults, " + std::to_string(blocked) + " blocklist hits, " +
              std::to_string(labels) + " label faults, " + std::to_string(invariant) + " invariant faults"};
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t tree_differences(const fs::path& a, const fs::path& b) {
  const auto fa = files_under(a);
  if (fa != files_under(b)) return fa.size() + 1;
  std::size_t diff = 0;
  for (const auto& f : fa) diff += test::slurp(a / f) != test::slurp(b / f);
  return diff;
}

Outcome determinism() {
  GeneratorConfig cfg;
  const auto first = test::scratch_dir("acc_det_a");
  const auto second = test::scratch_dir("acc_det_b");
  const auto wide = test::scratch_dir("acc_det_p8");
  cfg.run.parallel = 1;
  generate_dataset({100, 9009, first}, cfg);
  generate_dataset({100, 9009, second}, cfg);
  cfg.run.parallel = 8;
  generate_dataset({100, 9009, wide}, cfg);
  const auto repeat = tree_differences(first, second);
  const auto parallel = tree_differences(first, wide);
  const auto files = files_under(first).size();
  return {files == 302 && repeat == 0 && parallel == 0,
          std::to_string(files) + " files; repeat run differs in " + std::to_string(repeat) + ", parallel 8 differs in " +
              std::to_string(parallel)};
}

Outcome teacher_resilience() {
  test::FakeTeacher server([](int, const std::string&) { return test::ScriptedReply{500, "{\"error\":\"down\"}"}; });
  GeneratorConfig cfg;
  cfg.raster.resolution = 128;
  cfg.run.diversify = true;
  cfg.run.parallel = 2;
  cfg.teacher.mode = TeacherMode::http;
  cfg.teacher.base_url = server.base_url();
  cfg.teacher.max_retries = 2;
  cfg.teacher.timeout_seconds = 2.0;
  const auto dir = test::scratch_dir("acc_teacher");
  const std::uint64_t n = 8;
  const auto report = generate_dataset({n, 10010, dir}, cfg);
  std::size_t flagged = 0, three = 0;
  for (const auto& row : report.manifest.at("samples")) {
    const auto meta = nlohmann::json::parse(test::slurp(dir / row.at("meta").get<std::string>()));
    flagged += row.at("fallback").get<bool>() && meta.at("teacher").at("fallback").get<bool>();
    three += meta.at("teacher").at("attempts").get<int>() == 3;
    if (meta.at("text").at("answer").get<std::string>().rfind(meta.at("text").at("template").get<std::string>(), 0) != 0)
      return {false, "fallback answer does not start with the template"};
  }
  const bool exit_ok = report.failed.empty();
  return {exit_ok && flagged == n && three == n && report.fallbacks == n && server.calls() == static_cast<int>(3 * n),
          std::to_string(flagged) + "/" + std::to_string(n) + " fell back, " + std::to_string(three) +
              " after exactly 3 attempts, " + std::to_string(server.calls()) + " requests, " +
              (exit_ok ? "run succeeded" : "run reported failures")};
}

Outcome dataset_drill() {
  GeneratorConfig cfg;
  cfg.run.parallel = worker_count();
  const auto dir = test::scratch_dir("acc_drill");
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = generate_dataset({1000, 11011, dir}, cfg);
  const double gen = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto check = validate_dataset(dir, cfg.run.parallel);
  const auto& s = report.manifest.at("summary");
  std::string detail = "generated 1000 in " + num(gen) + " s on " + std::to_string(cfg.run.parallel) +
                       " worker(s); Healthy " + s.at("Healthy").dump() + ", NPDR " + s.at("NPDR").dump() + ", PDR " +
                       s.at("PDR").dump() + "; validate: " + std::to_string(check.problems.size()) + " problems";
  if (!check.ok()) detail += " (first: " + check.problems.front() + ")";
  return {report.failed.empty() && check.ok() && check.samples == 1000, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "Murray's-law audit on 50 forests", 60, murray_audit},
      {2, "dropout field bounds and shape", 30, dropout_bounds},
      {3, "pruning statistics vs exact inclusion", 120, pruning_statistics},
      {4, "parameter-range reproduction", 30, range_reproduction},
      {5, "MA radius compliance", 600, ma_radius_compliance},
      {6, "tortuosity bound and topology", 60, tortuosity_bound},
      {7, "NV containment", 60, nv_containment},
      {8, "text contract", 60, text_contract},
      {9, "determinism and parallelism invariance", 600, determinism},
      {10, "teacher resilience", 60, teacher_resilience},
      {11, "desk-scale dataset drill", 1800, dataset_drill},
  };
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  int failures = 0, ran = 0;
  for (const auto& c : criteria) {
    if (only && c.number != only) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = out.pass && in_time;
    failures += !pass;
    std::printf("C%-2d %s  %s: %s [%.1f s of %.0f s]\n", c.number, pass ? "PASS" : "FAIL", c.name, out.detail.c_str(), secs,
                c.budget_seconds);
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
