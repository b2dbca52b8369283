#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlkit/dataset.hpp"
#include "tlkit/geometry.hpp"

namespace tlkit {

enum class DistanceMetric { euclidean, one_minus_iou };

std::string to_string(DistanceMetric m);
/// Accepts `euclidean` and `one-minus-iou` (or `one_minus_iou`, `iou`).
DistanceMetric parse_metric(const std::string& s);

/// Euclidean distance between (w, h) pairs, or 1 - wh_iou.
double shape_distance(DistanceMetric m, const WH& a, const WH& b);

struct KMeansConfig {
  std::size_t k{9};
  DistanceMetric metric{DistanceMetric::one_minus_iou};
  std::size_t max_iters{300};
  std::uint64_t seed{41};
  /// Longest side of the letterboxed network input shapes are scaled to.
  double input_size{640.0};
};

struct KMeansResult {
  std::vector<WH> centroids;
  std::vector<std::size_t> assignment;
  /// Sum of point-to-assigned-centroid distances for the returned centroids.
  double inertia{0.0};
  /// Inertia after each assignment step; non-increasing.
  std::vector<double> inertia_history;
  std::size_t iterations{0};
  bool converged{false};
};

/// k-means over box shapes under the configured metric.
///
/// Seeding is k-means++ (probability proportional to squared metric distance)
/// drawn from cfg.seed. Each Lloyd iteration assigns every shape to its
/// nearest centroid (ties go to the lowest index), then moves each centroid to
/// the component-wise mean of its members, summed in index order. The mean is
/// not the minimizer of either metric's summed distance, so a cluster keeps its
/// previous centroid whenever the mean would not lower its cost. An empty
/// cluster is reseeded with the shape farthest from its current centroid.
/// Stops at an assignment fixed point or after cfg.max_iters.
///
/// Throws InvalidInputError for empty input, non-positive shapes or k == 0,
/// InfeasibleError when k exceeds the number of distinct shapes.
KMeansResult kmeans_shapes(std::span<const WH> shapes, const KMeansConfig& cfg);

/// Three anchors per detection scale, sorted by area.
struct AnchorSet {
  std::array<std::array<WH, 3>, 3> scales{};
  /// Grid cells per side for a 640 input, small to large objects.
  static constexpr std::array<int, 3> kFeatureMapSizes{80, 40, 20};

  const std::array<WH, 3>& small() const { return scales[0]; }
  const std::array<WH, 3>& medium() const { return scales[1]; }
  const std::array<WH, 3>& large() const { return scales[2]; }

  std::vector<WH> flat() const;
};

/// Stable sort by area; first three go to the 80x80 map, next to 40x40, last to 20x20.
AnchorSet group_anchors(std::span<const WH> centroids);

/// {"small": [[w,h],...], "medium": [...], "large": [...]} with real values.
nlohmann::json anchors_to_json(const AnchorSet& a);
/// Same layout with every value rounded to the nearest integer.
nlohmann::json anchors_to_json_rounded(const AnchorSet& a);
/// YOLO-style flat line: 18 comma-separated rounded integers.
std::string anchors_to_yolo_line(const AnchorSet& a);

/// Annotation shapes in pixels of a letterboxed input whose longest side is input_size.
std::vector<WH> dataset_shapes(const Dataset& d, double input_size);

struct AnchorFitness {
  double mean_best_iou{0.0};
  double best_possible_recall{0.0};
  double threshold{0.25};
};

/// Mean over shapes of the best wh_iou against any anchor, and the fraction of
/// shapes whose best wh_iou reaches threshold.
AnchorFitness anchor_fitness(std::span<const WH> anchors, std::span<const WH> shapes, double threshold = 0.25);
AnchorFitness anchor_fitness(const AnchorSet& a, const Dataset& d, double input_size, double threshold = 0.25);

struct MetricRun {
  DistanceMetric metric;
  KMeansResult kmeans;
  AnchorSet anchors;
  AnchorFitness fitness;
};

struct MetricComparison {
  std::size_t shape_count{0};
  std::size_t distinct_shapes{0};
  MetricRun euclidean;
  MetricRun one_minus_iou;
};

/// Clusters the dataset's shapes under both metrics with the same config
/// (cfg.k must be 9) and scores each AnchorSet on the same shapes. With fewer
/// distinct shapes than k, both runs return the distinct shapes cycled in
/// area order, which is a zero-inertia solution for either metric.
MetricComparison compare_metrics(const Dataset& d, const KMeansConfig& cfg, double threshold = 0.25);

nlohmann::json comparison_to_json(const MetricComparison& c);

}  // namespace tlkit
