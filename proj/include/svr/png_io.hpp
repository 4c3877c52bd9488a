#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace svr {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Encodes an 8-bit greyscale PNG. No ancillary chunks are written, so equal
/// pixels give equal bytes.
std::vector<std::uint8_t> encode_png_gray8(int width, int height, std::span<const std::uint8_t> pixels);

void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     std::span<const std::uint8_t> pixels);

/// Throws std::runtime_error unless the file is an 8-bit greyscale PNG.
GrayImage read_png_gray8(const std::filesystem::path& path);

}  // namespace svr
