#pragma once

// Shared fixtures for the C++ tests.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "svr/dropout.hpp"
#include "svr/forest.hpp"

namespace svr::test {

/// Circle lesion with no harmonics and a constant noise factor.
inline DropoutRegion circle_region(Vec2 center, double radius, double exponent = 2.0) {
  DropoutRegion r;
  r.center = center;
  r.radius = radius;
  r.exponent = exponent;
  r.noise_gain = 0.0;
  r.strength = 0.95;
  return r;
}

/// Region whose depth is exactly 1 at its centre: the noise field is pinned
/// to 1 and the gain lifts the clip argument to 1.
inline DropoutRegion saturated_region(Vec2 center, double radius) {
  DropoutRegion r = circle_region(center, radius);
  r.noise_gain = 0.5;
  r.noise.push_back({{0.0, 0.0}, 0.5 * 3.14159265358979323846, 1.0});
  return r;
}

/// Comb: a root, a straight spine with `teeth` side leaves, all horizontal at y.
inline VesselForest comb_forest(int teeth, double y, VesselKind kind = VesselKind::arterial) {
  VesselForest f;
  NodeId spine = f.add_root({0.05, y, 0.04}, 0.01, kind, Layer::superficial, {1, 0, 0});
  for (int i = 0; i < teeth; ++i) {
    const double x = 0.1 + 0.04 * i;
    const NodeId next = f.add_child(spine, {x, y, 0.04}, 0.005);
    f.add_child(next, {x, y + 0.02, 0.04}, 0.003);
    spine = next;
  }
  return f;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("svr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Exact probability that each item appears in a weighted draw of `k` items
/// without replacement, by summing over every ordered draw sequence with a
/// subset dynamic programme. Exponential in the item count; fine up to ~20.
inline std::vector<double> exact_inclusion(const std::vector<double>& w, int k) {
  const int n = static_cast<int>(w.size());
  const std::size_t states = std::size_t{1} << n;
  std::vector<double> reach(states, 0.0);  // probability of having drawn exactly this set
  reach[0] = 1.0;
  std::vector<double> incl(n, 0.0);
  double total = 0.0;
  for (double v : w) total += v;
  for (std::size_t mask = 0; mask < states; ++mask) {
    if (reach[mask] == 0.0) continue;
    const int size = __builtin_popcountll(mask);
    if (size == k) {
      for (int i = 0; i < n; ++i)
        if (mask >> i & 1) incl[i] += reach[mask];
      continue;
    }
    double left = total;
    for (int i = 0; i < n; ++i)
      if (mask >> i & 1) left -= w[i];
    for (int i = 0; i < n; ++i)
      if (!(mask >> i & 1)) reach[mask | (std::size_t{1} << i)] += reach[mask] * w[i] / left;
  }
  return incl;
}

}  // namespace svr::test
