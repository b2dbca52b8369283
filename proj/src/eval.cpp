#include "tlkit/eval.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "tlkit/error.hpp"

namespace fs = std::filesystem;

namespace tlkit {

double ConfusionCounts::precision() const noexcept {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double ConfusionCounts::recall() const noexcept {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts, double iou_thr) {
  if (!(iou_thr > 0.0 && iou_thr <= 1.0)) throw InvalidInputError("match_detections: IoU threshold outside (0, 1]");

  std::unordered_map<std::string, std::vector<std::size_t>> by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) by_image[gts[g].image_id].push_back(g);

  MatchResult r;
  r.order.resize(dets.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

  std::vector<bool> taken(gts.size(), false);
  r.flags.reserve(dets.size());
  for (std::size_t d : r.order) {
    std::size_t best = gts.size();
    double best_iou = -1.0;
    if (auto it = by_image.find(dets[d].image_id); it != by_image.end()) {
      for (std::size_t g : it->second) {
        if (taken[g]) continue;
        const double v = iou(dets[d].box, gts[g].box);
        if (v > best_iou) {
          best_iou = v;
          best = g;
        }
      }
    }
    if (best < gts.size() && best_iou >= iou_thr) {
      taken[best] = true;
      r.flags.push_back(Match::tp);
      ++r.counts.tp;
    } else {
      r.flags.push_back(Match::fp);
      ++r.counts.fp;
    }
  }
  r.counts.fn = gts.size() - r.counts.tp;
  return r;
}

PRCurve pr_curve(std::span<const Match> flags, std::size_t n_gt) {
  PRCurve c;
  c.n_gt = n_gt;
  c.points.reserve(flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] == Match::tp) ++tp;
    if (tp > n_gt) throw ContractError("pr_curve: more true positives than ground truths");
    const double recall = n_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_gt);
    c.points.push_back({recall, static_cast<double>(tp) / static_cast<double>(i + 1)});
  }
  return c;
}

double average_precision(const PRCurve& curve) {
  const auto& pts = curve.points;
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    running = std::max(running, pts[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ap += (pts[i].recall - prev_recall) * envelope[i];
    prev_recall = pts[i].recall;
  }
  return ap;
}

double mean_ap(std::span<const double> aps) {
  if (aps.empty()) throw InvalidInputError("mean_ap: no classes");
  double sum = 0.0;
  for (double a : aps) sum += a;
  return sum / static_cast<double>(aps.size());
}

std::vector<double> coco_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50.0 + 5.0 * i) / 100.0);
  return t;
}

namespace {

void validate_inputs(std::span<const Detection> dets, std::span<const GroundTruth> gts, std::size_t nc) {
  for (const auto& d : dets) {
    if (d.class_id < 0 || static_cast<std::size_t>(d.class_id) >= nc) {
      throw ValidationError("detection class id " + std::to_string(d.class_id) + " is not in the class list");
    }
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) throw InvalidInputError("detection confidence outside [0, 1]");
    if (!is_valid(d.box)) throw InvalidInputError("degenerate detection box in image " + d.image_id);
  }
  for (const auto& g : gts) {
    if (g.class_id < 0 || static_cast<std::size_t>(g.class_id) >= nc) {
      throw ValidationError("ground-truth class id " + std::to_string(g.class_id) + " is not in the class list");
    }
    if (!is_valid(g.box)) throw InvalidInputError("degenerate ground-truth box in image " + g.image_id);
  }
}

double class_ap(std::span<const Detection> dets, std::span<const GroundTruth> gts, double thr) {
  const MatchResult m = match_detections(dets, gts, thr);
  return average_precision(pr_curve(m.flags, gts.size()));
}

}  // namespace

EvalReport map_range(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                     const std::vector<std::string>& class_names, const EvalConfig& cfg) {
  const std::size_t nc = class_names.size();
  if (nc == 0) throw ValidationError("map_range: empty class list");
  if (cfg.thresholds.empty()) throw InvalidInputError("map_range: no IoU thresholds");
  validate_inputs(dets, gts, nc);

  std::vector<std::vector<Detection>> dets_by_class(nc);
  std::vector<std::vector<GroundTruth>> gts_by_class(nc);
  for (const auto& d : dets) dets_by_class[static_cast<std::size_t>(d.class_id)].push_back(d);
  for (const auto& g : gts) gts_by_class[static_cast<std::size_t>(g.class_id)].push_back(g);

  EvalReport r;
  r.class_names = class_names;
  r.thresholds = cfg.thresholds;
  r.operating_confidence = cfg.operating_confidence;
  r.counts_iou = cfg.counts_iou;
  r.ap.assign(nc, std::vector<double>(cfg.thresholds.size(), 0.0));
  r.ap50.assign(nc, 0.0);
  r.n_gt.assign(nc, 0);
  r.counts.resize(nc);
  r.curves50.resize(nc);

  for (std::size_t c = 0; c < nc; ++c) {
    const auto& cd = dets_by_class[c];
    const auto& cg = gts_by_class[c];
    r.n_gt[c] = cg.size();
    for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) r.ap[c][t] = class_ap(cd, cg, cfg.thresholds[t]);

    const MatchResult m50 = match_detections(cd, cg, 0.5);
    r.curves50[c] = pr_curve(m50.flags, cg.size());
    r.ap50[c] = average_precision(r.curves50[c]);

    std::vector<Detection> confident;
    std::copy_if(cd.begin(), cd.end(), std::back_inserter(confident),
                 [&](const Detection& d) { return d.confidence >= cfg.operating_confidence; });
    r.counts[c] = match_detections(confident, cg, cfg.counts_iou).counts;
  }

  r.map50 = mean_ap(r.ap50);
  std::vector<double> per_threshold(cfg.thresholds.size());
  for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
    std::vector<double> column(nc);
    for (std::size_t c = 0; c < nc; ++c) column[c] = r.ap[c][t];
    per_threshold[t] = mean_ap(column);
  }
  r.map50_95 = mean_ap(per_threshold);
  return r;
}

nlohmann::json eval_to_json(const EvalReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    const auto& k = r.counts[c];
    classes.push_back({{"class", r.class_names[c]},
                       {"n_gt", r.n_gt[c]},
                       {"ap50", r.ap50[c]},
                       {"ap", r.ap[c]},
                       {"tp", k.tp},
                       {"fp", k.fp},
                       {"fn", k.fn},
                       {"precision", k.precision()},
                       {"recall", k.recall()}});
  }
  return {{"map50", r.map50},
          {"map50_95", r.map50_95},
          {"num_classes", r.class_names.size()},
          {"thresholds", r.thresholds},
          {"operating_confidence", r.operating_confidence},
          {"counts_iou", r.counts_iou},
          {"classes", classes}};
}

std::string ap_table_csv(const EvalReport& r) {
  std::ostringstream out;
  out << std::setprecision(17) << "class";
  for (double t : r.thresholds) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, t);
    out << ",ap@" << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
  }
  out << '\n';
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    out << r.class_names[c];
    for (double v : r.ap[c]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

std::string pr_curves_csv(const EvalReport& r) {
  std::ostringstream out;
  out << std::setprecision(17) << "class,rank,recall,precision\n";
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    const auto& pts = r.curves50[c].points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out << r.class_names[c] << ',' << i + 1 << ',' << pts[i].recall << ',' << pts[i].precision << '\n';
    }
  }
  return out.str();
}

namespace {

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

template <typename T>
T number(const std::string& tok, const std::string& file, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) throw ParseError(file, line, "bad number `" + tok + "`");
  return v;
}

}  // namespace

std::vector<Detection> read_detections(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string(), 0, "cannot open detections file");
  std::vector<Detection> out;
  std::string line;
  const std::string name = file.string();
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto t = tokens(line);
    if (t.empty()) continue;
    if (t.size() != 7) throw ParseError(name, lineno, "expected `image_id class_id confidence x1 y1 x2 y2`");
    Detection d;
    d.image_id = t[0];
    d.class_id = number<int>(t[1], name, lineno);
    d.confidence = number<double>(t[2], name, lineno);
    d.box = {number<double>(t[3], name, lineno), number<double>(t[4], name, lineno),
             number<double>(t[5], name, lineno), number<double>(t[6], name, lineno)};
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
      throw ValidationError(name + ":" + std::to_string(lineno) + ": confidence outside [0, 1]");
    }
    if (!is_valid(d.box)) throw ValidationError(name + ":" + std::to_string(lineno) + ": invalid box");
    out.push_back(std::move(d));
  }
  return out;
}

std::map<std::string, std::pair<int, int>> read_size_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string(), 0, "cannot open size manifest");
  std::map<std::string, std::pair<int, int>> out;
  std::string line;
  const std::string name = file.string();
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto t = tokens(line);
    if (t.empty()) continue;
    if (t.size() != 3) throw ParseError(name, lineno, "expected `image_id width height`");
    const int w = number<int>(t[1], name, lineno);
    const int h = number<int>(t[2], name, lineno);
    if (w <= 0 || h <= 0) throw ValidationError(name + ":" + std::to_string(lineno) + ": non-positive image size");
    out[t[0]] = {w, h};
  }
  return out;
}

std::vector<GroundTruth> ground_truth_from_dataset(const Dataset& d) {
  std::vector<GroundTruth> out;
  for (const auto& img : d.images) {
    for (const auto& a : img.annotations) {
      out.push_back({img.id(), a.class_id, to_pixels(a.box, img.width, img.height)});
    }
  }
  return out;
}

std::vector<GroundTruth> ground_truth_from_labels(const fs::path& dir, const std::vector<std::string>& class_names,
                                                  const std::map<std::string, std::pair<int, int>>& sizes) {
  validate_class_names(class_names);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt" && e.path().filename() != "classes.txt") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<GroundTruth> out;
  for (const auto& f : files) {
    const std::string id = f.stem().string();
    const auto it = sizes.find(id);
    if (it == sizes.end()) throw ValidationError("no image size for " + id + " in manifest");
    for (const auto& a : read_labels(f, class_names.size())) {
      out.push_back({id, a.class_id, to_pixels(a.box, it->second.first, it->second.second)});
    }
  }
  return out;
}

BenchResult fps_benchmark(const std::function<void()>& workload, std::size_t warmup_iters, std::size_t timed_iters) {
  if (timed_iters == 0) throw InvalidInputError("fps_benchmark: timed_iters must be >= 1");
  for (std::size_t i = 0; i < warmup_iters; ++i) workload();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  for (std::size_t i = 0; i < timed_iters; ++i) workload();
  const auto elapsed = Clock::now() - start;
  const double ms = std::chrono::duration<double, std::milli>(elapsed).count();
  if (!(ms > 0.0)) throw ResolutionError("fps_benchmark: elapsed time below clock resolution");
  BenchResult r;
  r.iterations = timed_iters;
  r.mean_ms = ms / static_cast<double>(timed_iters);
  r.fps = 1000.0 / r.mean_ms;
  return r;
}

}  // namespace tlkit
