#include "tlkit/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "tlkit/error.hpp"

namespace fs = std::filesystem;

namespace tlkit {

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      pixels(static_cast<std::size_t>(w) * h * c, fill) {
  if (w <= 0 || h <= 0 || (c != 1 && c != 3)) throw InvalidInputError("Image: bad dimensions");
}

namespace {

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return e;
}

constexpr std::array<std::uint8_t, 8> kPngSig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& p, const char* mode) {
  FilePtr f(std::fopen(p.c_str(), mode));
  if (!f) throw FormatError("cannot open " + p.string());
  return f;
}

// ---- PNM ----------------------------------------------------------------

struct PnmHeader {
  int channels;
  int width;
  int height;
  int maxval;
};

int pnm_int(std::istream& in, const fs::path& p) {
  int ch = in.peek();
  while (ch != EOF && (std::isspace(ch) || ch == '#')) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
    } else {
      in.get();
    }
    ch = in.peek();
  }
  int v = 0;
  if (!(in >> v)) throw FormatError(p.string() + ": truncated PNM header");
  return v;
}

PnmHeader read_pnm_header(std::istream& in, const fs::path& p) {
  char magic[2]{};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw FormatError(p.string() + ": not a binary PPM/PGM");
  }
  PnmHeader h{};
  h.channels = magic[1] == '6' ? 3 : 1;
  h.width = pnm_int(in, p);
  h.height = pnm_int(in, p);
  h.maxval = pnm_int(in, p);
  if (h.width <= 0 || h.height <= 0) throw FormatError(p.string() + ": bad PNM size");
  if (h.maxval != 255) throw FormatError(p.string() + ": only 8-bit PNM is supported");
  in.get();  // single whitespace before the raster
  return h;
}

Image read_pnm(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string());
  const PnmHeader h = read_pnm_header(in, p);
  Image img(h.width, h.height, h.channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw FormatError(p.string() + ": truncated PNM raster");
  return img;
}

void write_pnm(const fs::path& p, const Image& img, int channels) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw FormatError("cannot write " + p.string());
  out << (channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
  if (channels == img.channels) {
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    return;
  }
  // Channel conversion: gray -> RGB replicates, RGB -> gray uses integer luma.
  std::vector<std::uint8_t> buf;
  buf.reserve(static_cast<std::size_t>(img.width) * img.height * channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (channels == 3) {
        const std::uint8_t v = img.at(x, y, 0);
        buf.insert(buf.end(), {v, v, v});
      } else {
        const int v = (299 * img.at(x, y, 0) + 587 * img.at(x, y, 1) + 114 * img.at(x, y, 2) + 500) / 1000;
        buf.push_back(static_cast<std::uint8_t>(v));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

// ---- PNG ----------------------------------------------------------------

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  // libpng requires the error callback not to return.
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

bool has_png_signature(std::FILE* f) {
  std::array<std::uint8_t, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), f) != sig.size()) return false;
  return sig == kPngSig;
}

Image read_png(const fs::path& p) {
  FilePtr f = open_file(p, "rb");
  if (!has_png_signature(f.get())) throw FormatError(p.string() + ": not a PNG file");

  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("libpng initialisation failed");
  }

  Image img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(p.string() + ": " + err);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  img = Image(static_cast<int>(png_get_image_width(png, info)),
              static_cast<int>(png_get_image_height(png, info)), channels);
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        img.pixels.data() + static_cast<std::size_t>(y) * img.width * channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

ImageSize read_png_size(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::array<std::uint8_t, 24> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  if (!in || !std::equal(kPngSig.begin(), kPngSig.end(), head.begin())) {
    throw FormatError(p.string() + ": not a PNG file");
  }
  // IHDR is always the first chunk: width and height are big-endian at 16..23.
  auto be32 = [&](std::size_t o) {
    return static_cast<int>((std::uint32_t{head[o]} << 24) | (std::uint32_t{head[o + 1]} << 16) |
                            (std::uint32_t{head[o + 2]} << 8) | std::uint32_t{head[o + 3]});
  };
  const ImageSize s{be32(16), be32(20)};
  if (s.width <= 0 || s.height <= 0) throw FormatError(p.string() + ": bad PNG size");
  return s;
}

void write_png(const fs::path& p, const Image& img) {
  FilePtr f = open_file(p, "wb");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError(p.string() + ": " + err);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(
        img.pixels.data() + static_cast<std::size_t>(y) * img.width * img.channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

bool is_image_file(const fs::path& p) {
  const std::string e = lower_ext(p);
  return e == ".png" || e == ".ppm" || e == ".pgm" || e == ".pnm";
}

ImageSize read_image_size(const fs::path& p) {
  const std::string e = lower_ext(p);
  if (e == ".png") return read_png_size(p);
  if (e == ".ppm" || e == ".pgm" || e == ".pnm") {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FormatError("cannot open " + p.string());
    const PnmHeader h = read_pnm_header(in, p);
    return {h.width, h.height};
  }
  throw FormatError(p.string() + ": unsupported image format");
}

Image read_image(const fs::path& p) {
  const std::string e = lower_ext(p);
  if (e == ".png") return read_png(p);
  if (e == ".ppm" || e == ".pgm" || e == ".pnm") return read_pnm(p);
  throw FormatError(p.string() + ": unsupported image format");
}

void write_image(const fs::path& p, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw FormatError("write_image: unsupported channel count");
  const std::string e = lower_ext(p);
  if (e == ".png") {
    write_png(p, img);
  } else if (e == ".ppm") {
    write_pnm(p, img, 3);
  } else if (e == ".pgm") {
    write_pnm(p, img, 1);
  } else if (e == ".pnm") {
    write_pnm(p, img, img.channels);
  } else {
    throw FormatError(p.string() + ": unsupported image format");
  }
}

}  // namespace tlkit
