#include <doctest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "svr/png_io.hpp"
#include "svr/raster.hpp"

using namespace svr;

TEST_SUITE("raster") {
  TEST_CASE("rendered capsule covers its analytic area") {
    RasterConfig cfg;
    cfg.resolution = 256;
    cfg.supersample = 4;
    const double r = 0.02;
    const double len = 0.5;
    const Capsule cap{{0.25, 0.5}, {0.25 + len, 0.5}, r, 1.0};
    const auto map = render_capsules(std::span<const Capsule>(&cap, 1), cfg);
    const double covered = std::accumulate(map.intensity.begin(), map.intensity.end(), 0.0) /
                           (cfg.resolution * cfg.resolution);
    const double want = 2.0 * r * len + kPi * r * r;
    CHECK(covered == doctest::Approx(want).epsilon(0.02));
    CHECK(map.mask_at(128, 128) == 1);
    CHECK(map.mask_at(128, 10) == 0);
    CHECK(map.pixel_pitch_mm == doctest::Approx(3.0 / 256));
  }

  TEST_CASE("compositing takes the maximum") {
    RasterConfig cfg;
    cfg.resolution = 64;
    const std::vector<Capsule> caps{{{0.1, 0.5}, {0.9, 0.5}, 0.05, 0.5}, {{0.5, 0.1}, {0.5, 0.9}, 0.05, 0.5}};
    const auto map = render_capsules(caps, cfg);
    CHECK(map.at(32, 32) == doctest::Approx(0.5f));
  }

  TEST_CASE("intensity grows with radius") {
    RasterConfig cfg;
    CHECK(segment_intensity(0.0, cfg) == doctest::Approx(cfg.base_intensity));
    CHECK(segment_intensity(cfg.bright_radius, cfg) == doctest::Approx(1.0));
    CHECK(segment_intensity(0.006, cfg) < segment_intensity(0.009, cfg));
  }

  TEST_CASE("binarize and quantize") {
    const std::vector<float> v{0.0f, 0.099f, 0.1f, 1.0f};
    CHECK(binarize(v, 0.1) == std::vector<std::uint8_t>{0, 0, 1, 1});
    CHECK(to_gray8(v) == std::vector<std::uint8_t>{0, 25, 26, 255});
  }

  TEST_CASE("forest scene has one capsule per segment") {
    const auto f = test::comb_forest(3, 0.5);
    const auto caps = scene_capsules(f, Appendages{}, RasterConfig{});
    CHECK(caps.size() == f.edges().size());
  }

  TEST_CASE("PNG round trip is lossless and deterministic") {
    std::vector<std::uint8_t> px(37 * 23);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i * 7);
    const auto dir = test::scratch_dir("png");
    write_png_gray8(dir / "a.png", 37, 23, px);
    const auto back = read_png_gray8(dir / "a.png");
    CHECK(back.width == 37);
    CHECK(back.height == 23);
    CHECK(back.pixels == px);
    CHECK(encode_png_gray8(37, 23, px) == encode_png_gray8(37, 23, px));
    CHECK_THROWS(read_png_gray8(dir / "missing.png"));
  }
}
