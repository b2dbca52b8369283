#include "tlkit/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tlkit/error.hpp"
#include "tlkit/random.hpp"

namespace tlkit {

std::string to_string(DistanceMetric m) {
  return m == DistanceMetric::euclidean ? "euclidean" : "one-minus-iou";
}

DistanceMetric parse_metric(const std::string& s) {
  if (s == "euclidean") return DistanceMetric::euclidean;
  if (s == "one-minus-iou" || s == "one_minus_iou" || s == "iou") return DistanceMetric::one_minus_iou;
  throw InvalidInputError("unknown distance metric `" + s + "`");
}

double shape_distance(DistanceMetric m, const WH& a, const WH& b) {
  if (m == DistanceMetric::euclidean) return std::hypot(a.w - b.w, a.h - b.h);
  return 1.0 - wh_iou(a, b);
}

namespace {

bool shape_less(const WH& a, const WH& b) { return a.w < b.w || (a.w == b.w && a.h < b.h); }

std::vector<WH> distinct_shapes(std::span<const WH> shapes) {
  std::vector<WH> u(shapes.begin(), shapes.end());
  std::sort(u.begin(), u.end(), shape_less);
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

void validate_shapes(std::span<const WH> shapes) {
  if (shapes.empty()) throw InvalidInputError("kmeans_shapes: no shapes");
  for (const auto& s : shapes) {
    if (!is_valid(s)) throw InvalidInputError("kmeans_shapes: non-positive shape");
  }
}

class Lloyd {
 public:
  Lloyd(std::span<const WH> shapes, DistanceMetric metric) : x_(shapes), metric_(metric) {}

  double dist(std::size_t i, const WH& c) const { return shape_distance(metric_, x_[i], c); }

  std::vector<WH> seed_plus_plus(std::size_t k, Rng& rng) const {
    const std::size_t n = x_.size();
    std::vector<WH> c;
    c.reserve(k);
    c.push_back(x_[uniform_index(rng, n)]);
    std::vector<double> dmin(n);
    for (std::size_t i = 0; i < n; ++i) dmin[i] = dist(i, c[0]);

    while (c.size() < k) {
      double total = 0.0;
      for (double d : dmin) total += d * d;
      const double u = uniform01(rng) * total;
      std::size_t pick = n;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (dmin[i] <= 0.0) continue;
        cum += dmin[i] * dmin[i];
        pick = i;
        if (cum > u) break;
      }
      if (pick == n) {
        // Every remaining shape rounds to distance 0; take the first one not yet chosen.
        for (std::size_t i = 0; i < n && pick == n; ++i) {
          if (std::find(c.begin(), c.end(), x_[i]) == c.end()) pick = i;
        }
      }
      c.push_back(x_[pick]);
      for (std::size_t i = 0; i < n; ++i) dmin[i] = std::min(dmin[i], dist(i, c.back()));
    }
    return c;
  }

  double assign(const std::vector<WH>& c, std::vector<std::size_t>& a) const {
    a.resize(x_.size());
    double inertia = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      std::size_t best = 0;
      double best_d = dist(i, c[0]);
      for (std::size_t j = 1; j < c.size(); ++j) {
        const double d = dist(i, c[j]);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      a[i] = best;
      inertia += best_d;
    }
    return inertia;
  }

  double cost(const std::vector<WH>& c, const std::vector<std::size_t>& a) const {
    double total = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) total += dist(i, c[a[i]]);
    return total;
  }

  /// Moves centroids for a fixed assignment without raising its cost.
  void update(std::vector<WH>& c, const std::vector<std::size_t>& a, double current) const {
    const std::size_t k = c.size();
    std::vector<WH> next = c;
    std::vector<double> sw(k, 0.0), sh(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < x_.size(); ++i) {
      sw[a[i]] += x_[i].w;
      sh[a[i]] += x_[i].h;
      ++count[a[i]];
    }
    std::vector<std::size_t> empty;
    for (std::size_t j = 0; j < k; ++j) {
      if (count[j] == 0) {
        empty.push_back(j);
        continue;
      }
      const WH mean{sw[j] / static_cast<double>(count[j]), sh[j] / static_cast<double>(count[j])};
      double old_cost = 0.0, new_cost = 0.0;
      for (std::size_t i = 0; i < x_.size(); ++i) {
        if (a[i] != j) continue;
        old_cost += dist(i, c[j]);
        new_cost += dist(i, mean);
      }
      if (new_cost < old_cost) next[j] = mean;
    }
    // Per-cluster gains can still round to a larger total.
    if (cost(next, a) > current) next = c;

    // An empty centroid contributes nothing for the current assignment, so
    // reseeding it cannot raise the cost.
    std::vector<bool> used(x_.size(), false);
    for (std::size_t j : empty) {
      std::size_t far = x_.size();
      double far_d = -1.0;
      for (std::size_t i = 0; i < x_.size(); ++i) {
        if (used[i]) continue;
        const double d = dist(i, next[a[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == x_.size()) break;
      used[far] = true;
      next[j] = x_[far];
    }
    c = std::move(next);
  }

 private:
  std::span<const WH> x_;
  DistanceMetric metric_;
};

}  // namespace

KMeansResult kmeans_shapes(std::span<const WH> shapes, const KMeansConfig& cfg) {
  validate_shapes(shapes);
  if (cfg.k == 0) throw InvalidInputError("kmeans_shapes: k must be >= 1");
  if (cfg.max_iters == 0) throw InvalidInputError("kmeans_shapes: max_iters must be >= 1");
  const std::size_t distinct = distinct_shapes(shapes).size();
  if (cfg.k > distinct) {
    throw InfeasibleError("kmeans_shapes: k = " + std::to_string(cfg.k) + " exceeds " +
                          std::to_string(distinct) + " distinct shapes");
  }

  Lloyd lloyd(shapes, cfg.metric);
  Rng rng(cfg.seed);
  KMeansResult r;
  r.centroids = lloyd.seed_plus_plus(cfg.k, rng);

  std::vector<std::size_t> a, next;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const double inertia = lloyd.assign(r.centroids, next);
    r.inertia_history.push_back(inertia);
    if (it > 0 && next == a) {
      r.converged = true;
      break;
    }
    a.swap(next);
    lloyd.update(r.centroids, a, inertia);
    ++r.iterations;
  }
  r.inertia = lloyd.assign(r.centroids, r.assignment);
  if (!r.converged) r.inertia_history.push_back(r.inertia);
  return r;
}

std::vector<WH> AnchorSet::flat() const {
  std::vector<WH> out;
  for (const auto& s : scales) out.insert(out.end(), s.begin(), s.end());
  return out;
}

AnchorSet group_anchors(std::span<const WH> centroids) {
  if (centroids.size() != 9) {
    throw InvalidInputError("group_anchors: expected 9 centroids, got " + std::to_string(centroids.size()));
  }
  std::vector<WH> sorted(centroids.begin(), centroids.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const WH& a, const WH& b) { return a.area() < b.area(); });
  AnchorSet s;
  for (std::size_t i = 0; i < 9; ++i) s.scales[i / 3][i % 3] = sorted[i];
  return s;
}

namespace {

nlohmann::json scales_json(const AnchorSet& a, bool rounded) {
  static constexpr const char* kNames[3] = {"small", "medium", "large"};
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t s = 0; s < 3; ++s) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& wh : a.scales[s]) {
      if (rounded) {
        rows.push_back({std::lround(wh.w), std::lround(wh.h)});
      } else {
        rows.push_back({wh.w, wh.h});
      }
    }
    j[kNames[s]] = rows;
  }
  return j;
}

}  // namespace

nlohmann::json anchors_to_json(const AnchorSet& a) { return scales_json(a, false); }
nlohmann::json anchors_to_json_rounded(const AnchorSet& a) { return scales_json(a, true); }

std::string anchors_to_yolo_line(const AnchorSet& a) {
  std::ostringstream out;
  bool first = true;
  for (const auto& wh : a.flat()) {
    out << (first ? "" : ", ") << std::lround(wh.w) << ',' << std::lround(wh.h);
    first = false;
  }
  return out.str();
}

std::vector<WH> dataset_shapes(const Dataset& d, double input_size) {
  if (!(input_size > 0.0)) throw InvalidInputError("input_size must be positive");
  std::vector<WH> out;
  out.reserve(d.annotation_count());
  for (const auto& img : d.images) {
    const double scale = input_size / std::max(img.width, img.height);
    for (const auto& a : img.annotations) {
      out.push_back({a.box.w * img.width * scale, a.box.h * img.height * scale});
    }
  }
  return out;
}

AnchorFitness anchor_fitness(std::span<const WH> anchors, std::span<const WH> shapes, double threshold) {
  if (shapes.empty()) throw InvalidInputError("anchor_fitness: no shapes");
  if (anchors.empty()) throw InvalidInputError("anchor_fitness: no anchors");
  AnchorFitness f;
  f.threshold = threshold;
  std::size_t hits = 0;
  double sum = 0.0;
  for (const auto& s : shapes) {
    double best = 0.0;
    for (const auto& a : anchors) best = std::max(best, wh_iou(s, a));
    sum += best;
    if (best >= threshold) ++hits;
  }
  f.mean_best_iou = sum / static_cast<double>(shapes.size());
  f.best_possible_recall = static_cast<double>(hits) / static_cast<double>(shapes.size());
  return f;
}

AnchorFitness anchor_fitness(const AnchorSet& a, const Dataset& d, double input_size, double threshold) {
  const auto shapes = dataset_shapes(d, input_size);
  if (shapes.empty()) throw InvalidInputError("anchor_fitness: dataset has no annotations");
  const auto anchors = a.flat();
  return anchor_fitness(anchors, shapes, threshold);
}

namespace {

KMeansResult degenerate_solution(std::span<const WH> shapes, std::vector<WH> distinct, std::size_t k) {
  std::stable_sort(distinct.begin(), distinct.end(), [](const WH& a, const WH& b) { return a.area() < b.area(); });
  KMeansResult r;
  for (std::size_t j = 0; j < k; ++j) r.centroids.push_back(distinct[j % distinct.size()]);
  for (const auto& s : shapes) {
    r.assignment.push_back(static_cast<std::size_t>(std::find(distinct.begin(), distinct.end(), s) - distinct.begin()));
  }
  r.inertia_history.push_back(0.0);
  r.converged = true;
  return r;
}

MetricRun run_metric(std::span<const WH> shapes, const std::vector<WH>& distinct, KMeansConfig cfg,
                     DistanceMetric m, double threshold) {
  cfg.metric = m;
  MetricRun run{m, {}, {}, {}};
  run.kmeans = distinct.size() < cfg.k ? degenerate_solution(shapes, distinct, cfg.k) : kmeans_shapes(shapes, cfg);
  run.anchors = group_anchors(run.kmeans.centroids);
  run.fitness = anchor_fitness(run.kmeans.centroids, shapes, threshold);
  return run;
}

nlohmann::json run_json(const MetricRun& r) {
  return {{"metric", to_string(r.metric)},
          {"anchors", anchors_to_json(r.anchors)},
          {"anchors_rounded", anchors_to_json_rounded(r.anchors)},
          {"yolo", anchors_to_yolo_line(r.anchors)},
          {"inertia", r.kmeans.inertia},
          {"iterations", r.kmeans.iterations},
          {"converged", r.kmeans.converged},
          {"mean_best_iou", r.fitness.mean_best_iou},
          {"best_possible_recall", r.fitness.best_possible_recall},
          {"bpr_threshold", r.fitness.threshold}};
}

}  // namespace

MetricComparison compare_metrics(const Dataset& d, const KMeansConfig& cfg, double threshold) {
  if (cfg.k != 9) throw InvalidInputError("compare_metrics: k must be 9 to form an AnchorSet");
  const auto shapes = dataset_shapes(d, cfg.input_size);
  validate_shapes(shapes);
  const auto distinct = distinct_shapes(shapes);
  MetricComparison c;
  c.shape_count = shapes.size();
  c.distinct_shapes = distinct.size();
  c.euclidean = run_metric(shapes, distinct, cfg, DistanceMetric::euclidean, threshold);
  c.one_minus_iou = run_metric(shapes, distinct, cfg, DistanceMetric::one_minus_iou, threshold);
  return c;
}

nlohmann::json comparison_to_json(const MetricComparison& c) {
  return {{"shapes", c.shape_count},
          {"distinct_shapes", c.distinct_shapes},
          {"euclidean", run_json(c.euclidean)},
          {"one_minus_iou", run_json(c.one_minus_iou)}};
}

}  // namespace tlkit
