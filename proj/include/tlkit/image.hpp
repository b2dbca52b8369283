#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace tlkit {

/// 8-bit interleaved pixel buffer with 1 (gray) or 3 (RGB) channels.
struct Image {
  int width{0};
  int height{0};
  int channels{0};
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const Image&) const = default;
};

struct ImageSize {
  int width{0};
  int height{0};
};

bool is_image_file(const std::filesystem::path& p);

/// Reads only the header. Throws FormatError for anything but PNG/PPM/PGM.
ImageSize read_image_size(const std::filesystem::path& p);

/// PNG (8-bit gray, gray+alpha, RGB, RGBA, palette; alpha is dropped) or binary PPM/PGM.
Image read_image(const std::filesystem::path& p);

/// Format is chosen by extension: .png, .ppm (RGB) or .pgm (gray).
void write_image(const std::filesystem::path& p, const Image& img);

}  // namespace tlkit
