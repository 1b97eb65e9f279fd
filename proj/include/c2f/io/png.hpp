#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace c2f::io {

/// 8-bit interleaved pixels, 1 (gray) or 3 (RGB) channels, row-major.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;

  Image8() = default;
  Image8(std::size_t width, std::size_t height, std::size_t channels, std::uint8_t fill = 0)
      : width(width), height(height), channels(channels),
        pixels(width * height * channels, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c = 0) {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
  bool operator==(const Image8&) const = default;
};

// Non-interlaced 8-bit gray or RGB only; anything else raises
// UnsupportedFormatError. Missing/corrupt files raise IoError.
Image8 read_png(const std::filesystem::path& path);
// Fixed compression settings, no timestamps: equal images give equal bytes.
void write_png(const std::filesystem::path& path, const Image8& image);

}  // namespace c2f::io
