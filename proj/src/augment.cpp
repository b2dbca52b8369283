#include "tlkit/augment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "tlkit/error.hpp"
#include "tlkit/random.hpp"

namespace fs = std::filesystem;

namespace tlkit {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

bool is_photometric(const AugmentOp& op) {
  return std::holds_alternative<aug::GaussianBlur>(op) || std::holds_alternative<aug::Invert>(op) ||
         std::holds_alternative<aug::Brightness>(op) || std::holds_alternative<aug::Contrast>(op);
}

std::string op_name(const AugmentOp& op) {
  return std::visit(overloaded{[](const aug::HFlip&) { return "hflip"; },
                               [](const aug::VFlip&) { return "vflip"; },
                               [](const aug::Affine&) { return "affine"; },
                               [](const aug::GaussianBlur&) { return "blur"; },
                               [](const aug::Invert&) { return "invert"; },
                               [](const aug::Brightness&) { return "brightness"; },
                               [](const aug::Contrast&) { return "contrast"; }},
                    op);
}

namespace {

double parse_double(const std::string& s, const std::string& ctx) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InvalidInputError("augment op `" + ctx + "`: bad number `" + s + "`");
  }
  return v;
}

Range parse_range(const std::string& s, const std::string& ctx) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) return Range(parse_double(s, ctx));
  Range r(parse_double(s.substr(0, dots), ctx), parse_double(s.substr(dots + 2), ctx));
  if (r.lo > r.hi) throw InvalidInputError("augment op `" + ctx + "`: empty range " + s);
  return r;
}

void check(const AugmentOp& op) {
  std::visit(overloaded{[](const aug::Affine& a) {
                          if (!(a.scale.lo > 0.0)) throw InvalidInputError("affine: scale must be > 0");
                        },
                        [](const aug::GaussianBlur& b) {
                          if (!(b.sigma.lo >= 0.0)) throw InvalidInputError("blur: sigma must be >= 0");
                        },
                        [](const auto&) {}},
             op);
}

}  // namespace

AugmentOp parse_augment_op(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = trim(text.substr(0, colon));
  std::vector<std::pair<std::string, Range>> kv;
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw InvalidInputError("augment op `" + text + "`: expected key=value");
      kv.emplace_back(trim(item.substr(0, eq)), parse_range(trim(item.substr(eq + 1)), text));
    }
  }
  auto take = [&](std::initializer_list<std::pair<const char*, Range*>> slots) {
    for (const auto& [key, value] : kv) {
      bool found = false;
      for (const auto& [slot, dest] : slots) {
        if (key == slot) {
          *dest = value;
          found = true;
        }
      }
      if (!found) throw InvalidInputError("augment op `" + text + "`: unknown key `" + key + "`");
    }
  };

  AugmentOp op;
  if (name == "hflip") {
    take({});
    op = aug::HFlip{};
  } else if (name == "vflip") {
    take({});
    op = aug::VFlip{};
  } else if (name == "invert") {
    take({});
    op = aug::Invert{};
  } else if (name == "affine") {
    aug::Affine a;
    take({{"rotate", &a.rotation_deg}, {"scale", &a.scale}, {"tx", &a.translate_x}, {"ty", &a.translate_y}});
    op = a;
  } else if (name == "blur") {
    aug::GaussianBlur b;
    take({{"sigma", &b.sigma}});
    op = b;
  } else if (name == "brightness") {
    aug::Brightness b;
    take({{"delta", &b.delta}});
    op = b;
  } else if (name == "contrast") {
    aug::Contrast c;
    take({{"factor", &c.factor}});
    op = c;
  } else {
    throw InvalidInputError("unknown augment op `" + name + "`");
  }
  check(op);
  return op;
}

std::vector<AugmentOp> parse_augment_ops(const std::string& text) {
  std::vector<AugmentOp> ops;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (!trim(item).empty()) ops.push_back(parse_augment_op(item));
  }
  return ops;
}

namespace {

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

double sample(const Range& r, Rng& rng) { return r.lo == r.hi ? r.lo : uniform(rng, r.lo, r.hi); }

// Row-major 2x3 forward map in pixel coordinates.
struct AffineMap {
  double a, b, tx;
  double c, d, ty;

  std::pair<double, double> apply(double x, double y) const { return {a * x + b * y + tx, c * x + d * y + ty}; }
};

std::pair<double, double> exact_sincos(double deg) {
  const double turns = deg / 90.0;
  if (turns == std::floor(turns)) {
    static constexpr double kSin[4] = {0.0, 1.0, 0.0, -1.0};
    static constexpr double kCos[4] = {1.0, 0.0, -1.0, 0.0};
    const auto q = static_cast<int>(((static_cast<long long>(turns) % 4) + 4) % 4);
    return {kSin[q], kCos[q]};
  }
  const double rad = deg * std::numbers::pi / 180.0;
  return {std::sin(rad), std::cos(rad)};
}

AffineMap make_affine(double deg, double scale, double tx, double ty, int w, int h) {
  const auto [s, c] = exact_sincos(deg);
  const double cx = w / 2.0;
  const double cy = h / 2.0;
  // y points down, so a visually counter-clockwise turn is [[c, s], [-s, c]].
  AffineMap m{scale * c, scale * s, 0.0, -scale * s, scale * c, 0.0};
  m.tx = cx - m.a * cx - m.b * cy + tx * w;
  m.ty = cy - m.c * cx - m.d * cy + ty * h;
  return m;
}

AffineMap invert(const AffineMap& m) {
  const double det = m.a * m.d - m.b * m.c;
  AffineMap r{m.d / det, -m.b / det, 0.0, -m.c / det, m.a / det, 0.0};
  r.tx = -(r.a * m.tx + r.b * m.ty);
  r.ty = -(r.c * m.tx + r.d * m.ty);
  return r;
}

Image warp(const Image& src, const AffineMap& fwd) {
  const AffineMap inv = invert(fwd);
  Image dst(src.width, src.height, src.channels, 0);
  for (int y = 0; y < dst.height; ++y) {
    for (int x = 0; x < dst.width; ++x) {
      // Pixel centers sit at half-integer coordinates.
      auto [sx, sy] = inv.apply(x + 0.5, y + 0.5);
      sx -= 0.5;
      sy -= 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int ch = 0; ch < src.channels; ++ch) {
        auto px = [&](int xx, int yy) -> double {
          if (xx < 0 || yy < 0 || xx >= src.width || yy >= src.height) return 0.0;
          return src.at(xx, yy, ch);
        };
        const double v = (1 - fy) * ((1 - fx) * px(x0, y0) + fx * px(x0 + 1, y0)) +
                         fy * ((1 - fx) * px(x0, y0 + 1) + fx * px(x0 + 1, y0 + 1));
        dst.at(x, y, ch) = to_u8(v);
      }
    }
  }
  return dst;
}

std::vector<Annotation> map_boxes(const std::vector<Annotation>& anns, const AffineMap& m, int w, int h) {
  std::vector<Annotation> out;
  out.reserve(anns.size());
  for (const auto& a : anns) {
    const BBoxPix p = to_pixels(a.box, w, h);
    const double xs[4] = {p.x1, p.x2, p.x2, p.x1};
    const double ys[4] = {p.y1, p.y1, p.y2, p.y2};
    double x1 = INFINITY, y1 = INFINITY, x2 = -INFINITY, y2 = -INFINITY;
    for (int k = 0; k < 4; ++k) {
      const auto [qx, qy] = m.apply(xs[k], ys[k]);
      x1 = std::min(x1, qx);
      x2 = std::max(x2, qx);
      y1 = std::min(y1, qy);
      y2 = std::max(y2, qy);
    }
    x1 = std::clamp(x1 / w, 0.0, 1.0);
    x2 = std::clamp(x2 / w, 0.0, 1.0);
    y1 = std::clamp(y1 / h, 0.0, 1.0);
    y2 = std::clamp(y2 / h, 0.0, 1.0);
    if (x2 - x1 < kMinBoxSize || y2 - y1 < kMinBoxSize) continue;
    out.push_back({a.class_id, {(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1}});
  }
  return out;
}

bool inside_unit(const BBoxNorm& b) {
  return b.cx - b.w / 2 >= 0.0 && b.cx + b.w / 2 <= 1.0 && b.cy - b.h / 2 >= 0.0 && b.cy + b.h / 2 <= 1.0;
}

// Mirrors the center directly when the box lies inside the image so that two
// flips restore it; boxes spilling outside take the hull-and-clamp path.
std::vector<Annotation> flip_boxes(const std::vector<Annotation>& anns, bool horizontal, int w, int h) {
  const AffineMap m = horizontal ? AffineMap{-1, 0, static_cast<double>(w), 0, 1, 0}
                                 : AffineMap{1, 0, 0, 0, -1, static_cast<double>(h)};
  std::vector<Annotation> out;
  out.reserve(anns.size());
  for (const auto& a : anns) {
    if (inside_unit(a.box)) {
      Annotation f = a;
      (horizontal ? f.box.cx : f.box.cy) = 1.0 - (horizontal ? a.box.cx : a.box.cy);
      out.push_back(f);
    } else {
      auto mapped = map_boxes({a}, m, w, h);
      out.insert(out.end(), mapped.begin(), mapped.end());
    }
  }
  return out;
}

Image flip(const Image& src, bool horizontal) {
  Image dst(src.width, src.height, src.channels);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const int sx = horizontal ? src.width - 1 - x : x;
      const int sy = horizontal ? y : src.height - 1 - y;
      for (int ch = 0; ch < src.channels; ++ch) dst.at(x, y, ch) = src.at(sx, sy, ch);
    }
  }
  return dst;
}

Image gaussian_blur(const Image& src, double sigma) {
  if (sigma == 0.0) return src;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (auto& v : k) v /= sum;

  const int w = src.width, h = src.height, nc = src.channels;
  std::vector<double> tmp(src.pixels.size());
  auto idx = [&](int x, int y, int ch) { return (static_cast<std::size_t>(y) * w + x) * nc + ch; };
  // Horizontal then vertical pass, clamp-to-edge borders.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < nc; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += k[static_cast<std::size_t>(i + radius)] * src.at(std::clamp(x + i, 0, w - 1), y, ch);
        }
        tmp[idx(x, y, ch)] = acc;
      }
    }
  }
  Image dst(w, h, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < nc; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += k[static_cast<std::size_t>(i + radius)] * tmp[idx(x, std::clamp(y + i, 0, h - 1), ch)];
        }
        dst.at(x, y, ch) = to_u8(acc);
      }
    }
  }
  return dst;
}

template <typename F>
Image map_levels(const Image& src, F&& f) {
  Image dst = src;
  for (auto& v : dst.pixels) v = to_u8(f(static_cast<double>(v)));
  return dst;
}

}  // namespace

Augmented augment(const Image& img, const std::vector<Annotation>& anns, const AugmentOp& op,
                  std::uint64_t seed) {
  if ((img.channels != 1 && img.channels != 3) || img.width <= 0 || img.height <= 0 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels) {
    throw FormatError("augment: expected an 8-bit gray or RGB buffer");
  }
  for (const auto& a : anns) {
    if (!is_valid(a.box)) throw InvalidInputError("augment: invalid annotation box");
  }
  check(op);
  Rng rng(seed);
  const int w = img.width, h = img.height;

  return std::visit(
      overloaded{
          [&](const aug::HFlip&) { return Augmented{flip(img, true), flip_boxes(anns, true, w, h)}; },
          [&](const aug::VFlip&) { return Augmented{flip(img, false), flip_boxes(anns, false, w, h)}; },
          [&](const aug::Affine& a) {
            const double deg = sample(a.rotation_deg, rng);
            const double scale = sample(a.scale, rng);
            const double tx = sample(a.translate_x, rng);
            const double ty = sample(a.translate_y, rng);
            const AffineMap m = make_affine(deg, scale, tx, ty, w, h);
            return Augmented{warp(img, m), map_boxes(anns, m, w, h)};
          },
          [&](const aug::GaussianBlur& b) { return Augmented{gaussian_blur(img, sample(b.sigma, rng)), anns}; },
          [&](const aug::Invert&) { return Augmented{map_levels(img, [](double v) { return 255.0 - v; }), anns}; },
          [&](const aug::Brightness& b) {
            const double delta = sample(b.delta, rng);
            return Augmented{map_levels(img, [delta](double v) { return v + delta; }), anns};
          },
          [&](const aug::Contrast& c) {
            const double f = sample(c.factor, rng);
            return Augmented{map_levels(img, [f](double v) { return 128.0 + f * (v - 128.0); }), anns};
          }},
      op);
}

Dataset augment_dataset(const Dataset& d, const std::vector<AugmentOp>& ops, std::uint64_t seed,
                        const fs::path& out_dir) {
  Dataset out = d;
  if (ops.empty()) return out;

  std::set<std::string> ids;
  for (const auto& img : d.images) {
    if (!ids.insert(img.id()).second) throw ValidationError("augment_dataset: duplicate image id " + img.id());
  }
  fs::create_directories(out_dir);
  out.images.reserve(d.images.size() * (1 + ops.size()));
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    const AnnotatedImage& src = d.images[i];
    const Image pixels = read_image(src.image_path);
    for (std::size_t j = 0; j < ops.size(); ++j) {
      Augmented a = augment(pixels, src.annotations, ops[j], derive_seed(seed, i, j));
      const fs::path path = out_dir / (src.id() + "_aug" + std::to_string(j) + ".png");
      write_image(path, a.image);
      fs::path labels = path;
      write_labels(labels.replace_extension(".txt"), a.annotations);
      out.images.push_back({path, a.image.width, a.image.height, std::move(a.annotations)});
    }
  }
  return out;
}

}  // namespace tlkit
