#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlkit/geometry.hpp"

namespace tlkit {

struct Annotation {
  int class_id{0};
  BBoxNorm box;

  bool operator==(const Annotation&) const = default;
};

struct AnnotatedImage {
  std::filesystem::path image_path;
  int width{0};
  int height{0};
  std::vector<Annotation> annotations;

  /// File stem; detections refer to images by this id.
  std::string id() const { return image_path.stem().string(); }

  bool operator==(const AnnotatedImage&) const = default;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<AnnotatedImage> images;

  std::size_t annotation_count() const;
};

/// Throws ValidationError unless names are non-empty and unique.
void validate_class_names(const std::vector<std::string>& names);

/// One class name per line; blank lines and surrounding whitespace are ignored.
std::vector<std::string> read_class_names(const std::filesystem::path& file);

/// Parses one YOLO label file. Lines are `class_id cx cy w h`, blank lines skipped.
/// Malformed lines raise ParseError; out-of-range ids or boxes raise ValidationError.
std::vector<Annotation> read_labels(const std::filesystem::path& file, std::size_t num_classes);

void write_labels(const std::filesystem::path& file, const std::vector<Annotation>& anns);

/// Label file for an image: the sibling `.txt`, or the `labels/` counterpart of
/// an `images/` directory when no sibling exists.
std::filesystem::path label_path_for(const std::filesystem::path& image_path);

/// Scans root_dir recursively for PNG/PPM/PGM images, sorted by path. Images
/// without a label file get an empty annotation list.
Dataset load_dataset(const std::filesystem::path& root_dir, std::vector<std::string> class_names);

/// Dataset statistics over normalized box sizes.
struct StatsReport {
  std::vector<std::string> class_names;
  std::vector<std::size_t> counts;
  std::vector<double> mean_w;
  std::vector<double> mean_h;
  std::size_t total{0};
  std::size_t image_count{0};
  /// hist[i][j] counts boxes with w in bin i and h in bin j over [0, 1].
  std::size_t bins{0};
  std::vector<std::vector<std::size_t>> hist;
};

StatsReport dataset_stats(const Dataset& d, std::size_t bins = 10);

std::string stats_to_csv(const StatsReport& r);
std::string histogram_to_csv(const StatsReport& r);
nlohmann::json stats_to_json(const StatsReport& r);

struct SplitRatios {
  double train{8.0};
  double val{1.0};
  double test{1.0};
};

struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Per-part sizes for n items. Validation and test sizes are n*ratio rounded
/// half up; the training split takes the remainder.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

/// Seeded shuffle then contiguous slicing into train/val/test.
DatasetSplit split_dataset(const Dataset& d, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace tlkit
