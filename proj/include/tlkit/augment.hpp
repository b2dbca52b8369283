#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "tlkit/dataset.hpp"
#include "tlkit/image.hpp"

namespace tlkit {

/// Closed interval a parameter is drawn from. lo == hi pins the value.
struct Range {
  double lo{0.0};
  double hi{0.0};

  Range() = default;
  Range(double v) : lo(v), hi(v) {}  // NOLINT(google-explicit-constructor)
  Range(double l, double h) : lo(l), hi(h) {}

  bool operator==(const Range&) const = default;
};

namespace aug {

struct HFlip {};
struct VFlip {};

/// Rotation (degrees, counter-clockwise as displayed) and scaling about the
/// image center, then translation by fractions of the image size.
struct Affine {
  Range rotation_deg{0.0};
  Range scale{1.0};
  Range translate_x{0.0};
  Range translate_y{0.0};
};

struct GaussianBlur {
  Range sigma{1.0};
};

struct Invert {};

/// Adds delta (in 8-bit levels) to every channel.
struct Brightness {
  Range delta{0.0};
};

/// Scales the distance of every level from mid-gray 128.
struct Contrast {
  Range factor{1.0};
};

}  // namespace aug

using AugmentOp = std::variant<aug::HFlip, aug::VFlip, aug::Affine, aug::GaussianBlur, aug::Invert,
                               aug::Brightness, aug::Contrast>;

/// Blur, invert, brightness and contrast never touch annotations.
bool is_photometric(const AugmentOp& op);

std::string op_name(const AugmentOp& op);

/// Parses `name[:key=value,...]` where a value is `x` or `lo..hi`. Names:
/// hflip, vflip, affine (rotate, scale, tx, ty), blur (sigma), invert,
/// brightness (delta), contrast (factor).
AugmentOp parse_augment_op(const std::string& text);

/// Semicolon-separated list of parse_augment_op entries.
std::vector<AugmentOp> parse_augment_ops(const std::string& text);

struct Augmented {
  Image image;
  std::vector<Annotation> annotations;
};

/// Minimum normalized width/height a transformed box must keep.
inline constexpr double kMinBoxSize = 1e-3;

/// Applies one op. Range parameters are sampled from `seed`. Geometric ops map
/// each box's corners, take the axis-aligned hull, clamp it to the image and
/// drop boxes thinner than kMinBoxSize.
Augmented augment(const Image& img, const std::vector<Annotation>& anns, const AugmentOp& op,
                  std::uint64_t seed);

/// Returns the originals (paths unchanged) followed by one augmented copy per
/// (image, op), written to out_dir as `<id>_aug<k>.png` with sibling labels.
Dataset augment_dataset(const Dataset& d, const std::vector<AugmentOp>& ops, std::uint64_t seed,
                        const std::filesystem::path& out_dir);

}  // namespace tlkit
