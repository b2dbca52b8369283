#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlkit/dataset.hpp"
#include "tlkit/geometry.hpp"

namespace tlkit {

struct Detection {
  std::string image_id;
  int class_id{0};
  BBoxPix box;
  double confidence{0.0};
};

struct GroundTruth {
  std::string image_id;
  int class_id{0};
  BBoxPix box;
};

struct ConfusionCounts {
  std::size_t tp{0};
  std::size_t fp{0};
  std::size_t fn{0};

  /// TP / (TP + FP), 0 when there are no detections.
  double precision() const noexcept;
  /// TP / (TP + FN), 0 when there are no ground truths.
  double recall() const noexcept;

  bool operator==(const ConfusionCounts&) const = default;
};

enum class Match : std::uint8_t { fp, tp };

struct MatchResult {
  /// Detection indices by descending confidence; ties keep input order.
  std::vector<std::size_t> order;
  /// One flag per entry of `order`.
  std::vector<Match> flags;
  ConfusionCounts counts;
};

/// Greedy single-class matching. Each detection, taken by descending
/// confidence, claims the unmatched ground truth of the same image with the
/// highest IoU if that IoU reaches iou_thr; otherwise it is a false positive.
MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts, double iou_thr);

struct PRPoint {
  double recall{0.0};
  double precision{0.0};

  bool operator==(const PRPoint&) const = default;
};

struct PRCurve {
  std::vector<PRPoint> points;
  std::size_t n_gt{0};
};

/// Cumulative precision and recall after every rank. Throws ContractError for
/// a true positive when n_gt is 0.
PRCurve pr_curve(std::span<const Match> flags, std::size_t n_gt);

/// Area under the precision envelope (max precision at equal or higher recall),
/// integrated over every recall step.
double average_precision(const PRCurve& curve);

/// Arithmetic mean; throws InvalidInputError on an empty list.
double mean_ap(std::span<const double> aps);

/// 0.50, 0.55, ..., 0.95.
std::vector<double> coco_thresholds();

struct EvalConfig {
  std::vector<double> thresholds = coco_thresholds();
  /// Detections below this confidence are ignored for the confusion counts.
  double operating_confidence{0.25};
  /// IoU threshold of the confusion counts.
  double counts_iou{0.5};
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<double> thresholds;
  /// ap[class][threshold]
  std::vector<std::vector<double>> ap;
  std::vector<double> ap50;
  double map50{0.0};
  double map50_95{0.0};
  std::vector<std::size_t> n_gt;
  /// At counts_iou, detections at or above the operating confidence.
  std::vector<ConfusionCounts> counts;
  double operating_confidence{0.25};
  double counts_iou{0.5};
  /// IoU 0.5 curves over all detections, for plotting.
  std::vector<PRCurve> curves50;
};

/// Per-class AP at every threshold. Classes without ground truth score 0.
/// Throws ValidationError for class ids outside class_names.
EvalReport map_range(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                     const std::vector<std::string>& class_names, const EvalConfig& cfg = {});

nlohmann::json eval_to_json(const EvalReport& r);
/// Rows are classes, columns IoU thresholds.
std::string ap_table_csv(const EvalReport& r);
/// class,rank,recall,precision at IoU 0.5.
std::string pr_curves_csv(const EvalReport& r);

/// Lines `image_id class_id confidence x1 y1 x2 y2`; blank lines skipped.
std::vector<Detection> read_detections(const std::filesystem::path& file);

/// Lines `image_id width height`.
std::map<std::string, std::pair<int, int>> read_size_manifest(const std::filesystem::path& file);

/// Ground truth in pixel corners from a loaded dataset, ids are image stems.
std::vector<GroundTruth> ground_truth_from_dataset(const Dataset& d);

/// Ground truth from label files alone, sized by a manifest. Every `.txt` under
/// dir except `classes.txt` is a label file.
std::vector<GroundTruth> ground_truth_from_labels(const std::filesystem::path& dir,
                                                  const std::vector<std::string>& class_names,
                                                  const std::map<std::string, std::pair<int, int>>& sizes);

struct BenchResult {
  double mean_ms{0.0};
  double fps{0.0};
  std::size_t iterations{0};
};

/// Runs warmup_iters untimed calls, then times timed_iters calls on a
/// monotonic clock. fps = 1000 / mean_ms.
BenchResult fps_benchmark(const std::function<void()>& workload, std::size_t warmup_iters, std::size_t timed_iters);

}  // namespace tlkit
