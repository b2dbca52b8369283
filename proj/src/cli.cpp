#include "tlkit/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tlkit/anchors.hpp"
#include "tlkit/augment.hpp"
#include "tlkit/dataset.hpp"
#include "tlkit/error.hpp"
#include "tlkit/eval.hpp"
#include "tlkit/nn/cbam.hpp"
#include "tlkit/nn/focal.hpp"
#include "tlkit/nn/grad_check.hpp"
#include "tlkit/nn/params_io.hpp"
#include "tlkit/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tlkit::cli {

namespace {

/// A check that ran but missed its tolerance; maps to kNumeric.
class ToleranceExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed{kDefaultSeed};
  std::string out_path;
  std::string format{"json"};
};

struct DataArgs {
  std::string dir;
  std::string classes;
};

void add_data(CLI::App* cmd, DataArgs& d, const std::string& flag = "--data") {
  cmd->add_option(flag, d.dir, "Dataset root (images with sibling YOLO .txt labels)")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--classes", d.classes,
                  "Comma-separated class names; default reads classes.txt in the dataset root");
}

void add_seed(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for every randomized step")->capture_default_str();
}

void add_out(CLI::App* cmd, Common& c) { cmd->add_option("--out", c.out_path, "Write the report here instead of stdout"); }

void add_format(CLI::App* cmd, Common& c, std::vector<std::string> choices) {
  c.format = choices.front();
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember(choices))->capture_default_str();
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<std::string> class_names(const DataArgs& d) {
  if (!d.classes.empty()) {
    auto names = split_list(d.classes);
    validate_class_names(names);
    return names;
  }
  const fs::path file = fs::path(d.dir) / "classes.txt";
  if (!fs::exists(file)) throw ValidationError("no --classes given and " + file.string() + " does not exist");
  return read_class_names(file);
}

Dataset load(const DataArgs& d) { return load_dataset(d.dir, class_names(d)); }

void emit(const Common& c, std::ostream& out, const std::string& text) {
  if (c.out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.out_path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + c.out_path);
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- subcommands ----------------------------------------------------------

struct StatsArgs {
  Common common;
  DataArgs data;
  std::size_t bins{10};
  std::string histogram;
};

void stats_cmd(const StatsArgs& a, std::ostream& out) {
  const StatsReport r = dataset_stats(load(a.data), a.bins);
  if (!a.histogram.empty()) {
    std::ofstream h(a.histogram);
    if (!h) throw ValidationError("cannot write " + a.histogram);
    h << histogram_to_csv(r);
  }
  emit(a.common, out, a.common.format == "csv" ? stats_to_csv(r) : dump(stats_to_json(r)));
}

struct SplitArgs {
  Common common;
  DataArgs data;
  std::string ratios{"8,1,1"};
  std::string lists_dir;
};

void split_cmd(const SplitArgs& a, std::ostream& out) {
  const auto parts = split_list(a.ratios);
  if (parts.size() != 3) throw InvalidInputError("--ratios needs three values, e.g. 8,1,1");
  SplitRatios ratios{};
  try {
    ratios = {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
  } catch (const std::exception&) {
    throw InvalidInputError("--ratios: bad number in `" + a.ratios + "`");
  }
  const Dataset d = load(a.data);
  const DatasetSplit s = split_dataset(d, ratios, a.common.seed);

  json j = {{"seed", a.common.seed}, {"total", d.images.size()}};
  const std::pair<const char*, const Dataset*> named[3] = {{"train", &s.train}, {"val", &s.val}, {"test", &s.test}};
  if (!a.lists_dir.empty()) fs::create_directories(a.lists_dir);
  for (const auto& [name, part] : named) {
    json paths = json::array();
    for (const auto& img : part->images) paths.push_back(img.image_path.generic_string());
    j[name] = {{"count", part->images.size()}, {"images", paths}};
    if (!a.lists_dir.empty()) {
      std::ofstream f(fs::path(a.lists_dir) / (std::string(name) + ".txt"));
      for (const auto& img : part->images) f << img.image_path.generic_string() << '\n';
    }
  }
  emit(a.common, out, dump(j));
}

struct AugmentArgs {
  Common common;
  DataArgs data;
  std::string ops;
  std::string out_dir;
  bool skip_originals{false};
};

void augment_cmd(const AugmentArgs& a, std::ostream& out) {
  const auto ops = parse_augment_ops(a.ops);
  const Dataset d = load(a.data);
  const Dataset result = augment_dataset(d, ops, a.common.seed, a.out_dir);
  fs::create_directories(a.out_dir);
  if (!a.skip_originals) {
    for (const auto& img : d.images) {
      const fs::path dst = fs::path(a.out_dir) / img.image_path.filename();
      fs::copy_file(img.image_path, dst, fs::copy_options::overwrite_existing);
      fs::path labels = dst;
      write_labels(labels.replace_extension(".txt"), img.annotations);
    }
  }
  std::ofstream(fs::path(a.out_dir) / "classes.txt") << [&] {
    std::string s;
    for (const auto& n : d.class_names) s += n + "\n";
    return s;
  }();

  json names = json::array();
  for (const auto& op : ops) names.push_back(op_name(op));
  emit(a.common, out,
       dump({{"seed", a.common.seed},
             {"ops", names},
             {"images_in", d.images.size()},
             {"images_out", result.images.size()},
             {"annotations_out", result.annotation_count()},
             {"out_dir", fs::path(a.out_dir).generic_string()}}));
}

struct KMeansArgs {
  Common common;
  DataArgs data;
  std::string metric{"one-minus-iou"};
  std::size_t k{9};
  std::size_t max_iters{300};
  double input_size{640.0};
  double threshold{0.25};

  KMeansConfig config() const {
    KMeansConfig c;
    c.k = k;
    c.metric = parse_metric(metric);
    c.max_iters = max_iters;
    c.seed = common.seed;
    c.input_size = input_size;
    return c;
  }
};

void add_kmeans(CLI::App* cmd, KMeansArgs& a, bool with_metric) {
  add_data(cmd, a.data);
  add_seed(cmd, a.common);
  add_out(cmd, a.common);
  if (with_metric) {
    cmd->add_option("--metric", a.metric, "Clustering distance")
        ->check(CLI::IsMember({"euclidean", "one-minus-iou"}))
        ->capture_default_str();
  }
  cmd->add_option("--k", a.k, "Number of clusters")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--max-iters", a.max_iters, "Lloyd iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--input-size", a.input_size, "Letterboxed network input side in pixels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--threshold", a.threshold, "wh-IoU threshold for best possible recall")->capture_default_str();
}

void anchors_cmd(const KMeansArgs& a, std::ostream& out) {
  const Dataset d = load(a.data);
  const KMeansConfig cfg = a.config();
  const auto shapes = dataset_shapes(d, cfg.input_size);
  const KMeansResult r = kmeans_shapes(shapes, cfg);
  const AnchorFitness fit = anchor_fitness(r.centroids, shapes, a.threshold);

  if (cfg.k != 9) {
    if (a.common.format == "yolo") throw InvalidInputError("--format yolo needs --k 9");
    json c = json::array();
    for (const auto& wh : r.centroids) c.push_back({wh.w, wh.h});
    emit(a.common, out, dump({{"centroids", c}, {"inertia", r.inertia}, {"mean_best_iou", fit.mean_best_iou}}));
    return;
  }
  const AnchorSet set = group_anchors(r.centroids);
  if (a.common.format == "yolo") {
    emit(a.common, out, anchors_to_yolo_line(set) + "\n");
  } else if (a.common.format == "report") {
    emit(a.common, out,
         dump({{"metric", to_string(cfg.metric)},
               {"anchors", anchors_to_json(set)},
               {"anchors_rounded", anchors_to_json_rounded(set)},
               {"yolo", anchors_to_yolo_line(set)},
               {"inertia", r.inertia},
               {"iterations", r.iterations},
               {"converged", r.converged},
               {"mean_best_iou", fit.mean_best_iou},
               {"best_possible_recall", fit.best_possible_recall}}));
  } else {
    emit(a.common, out, dump(anchors_to_json(set)));
  }
}

void compare_cmd(const KMeansArgs& a, std::ostream& out) {
  const MetricComparison c = compare_metrics(load(a.data), a.config(), a.threshold);
  emit(a.common, out, dump(comparison_to_json(c)));
}

struct EvalArgs {
  Common common;
  DataArgs gt;
  std::string dets;
  std::string sizes;
  double iou{0.5};
  double conf{0.25};
  std::string pr_curves;
};

void eval_cmd(const EvalArgs& a, std::ostream& out) {
  const auto names = class_names(a.gt);
  const std::vector<GroundTruth> gts = a.sizes.empty()
                                           ? ground_truth_from_dataset(load_dataset(a.gt.dir, names))
                                           : ground_truth_from_labels(a.gt.dir, names, read_size_manifest(a.sizes));
  const auto dets = read_detections(a.dets);
  EvalConfig cfg;
  cfg.counts_iou = a.iou;
  cfg.operating_confidence = a.conf;
  const EvalReport r = map_range(dets, gts, names, cfg);
  if (!a.pr_curves.empty()) {
    std::ofstream f(a.pr_curves);
    if (!f) throw ValidationError("cannot write " + a.pr_curves);
    f << pr_curves_csv(r);
  }
  emit(a.common, out, a.common.format == "csv" ? ap_table_csv(r) : dump(eval_to_json(r)));
}

struct FocalArgs {
  Common common;
  std::optional<double> p;
  int y{1};
  double gamma{2.0};
  double alpha{0.25};
  std::string input;
};

void focal_cmd(const FocalArgs& a, std::ostream& out) {
  const nn::FocalParams fp{a.alpha, a.gamma};
  if (!a.input.empty()) {
    std::ifstream in(a.input);
    if (!in) throw ParseError(a.input, 0, "cannot open");
    std::vector<double> ps;
    std::vector<int> ys;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
      std::istringstream ls(line);
      double p = 0.0;
      int y = 0;
      if (!(ls >> p)) continue;
      if (!(ls >> y)) throw ParseError(a.input, lineno, "expected `p y`");
      ps.push_back(p);
      ys.push_back(y);
    }
    const auto b = nn::focal_loss_mean(ps, ys, fp);
    emit(a.common, out,
         dump({{"n", ps.size()}, {"mean_loss", b.mean}, {"clamped", b.clamped}, {"alpha", a.alpha}, {"gamma", a.gamma}}));
    return;
  }
  if (!a.p) throw InvalidInputError("focal: give --p or --input");
  const auto v = nn::focal_loss(*a.p, a.y, fp);
  const auto g = nn::focal_loss_grad(*a.p, a.y, fp);
  emit(a.common, out,
       dump({{"p", *a.p},
             {"y", a.y},
             {"alpha", a.alpha},
             {"gamma", a.gamma},
             {"loss", v.value},
             {"grad", g.value},
             {"clamped", v.clamped}}));
}

std::vector<std::size_t> parse_shape(const std::string& s) {
  std::vector<std::size_t> dims;
  for (const auto& t : split_list(s)) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(t, &pos);
      if (pos != t.size() || v <= 0) throw std::invalid_argument(t);
      dims.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw InvalidInputError("--shape: bad dimension `" + t + "`");
    }
  }
  if (dims.size() != 4) throw InvalidInputError("--shape needs four values n,c,h,w");
  return dims;
}

struct CbamArgs {
  Common common;
  std::string shape{"2,16,5,5"};
  std::size_t reduction{16};
  std::size_t kernel{7};
  double step{1e-6};
  double tol{1e-5};
  std::string params;
  std::string save_params;
  bool zero_weights{false};
};

void add_cbam(CLI::App* cmd, CbamArgs& a) {
  cmd->add_option("--shape", a.shape, "Input dims n,c,h,w")->capture_default_str();
  cmd->add_option("--reduction", a.reduction, "MLP reduction ratio (channels must divide)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--kernel", a.kernel, "Spatial kernel size (odd)")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--params", a.params, "Load CBAM parameters from a blob instead of seeding them");
  cmd->add_flag("--zero-weights", a.zero_weights, "Use all-zero parameters");
}

struct CbamSetup {
  nn::Tensor4 input;
  nn::CbamParams params;
  nn::Tensor4 grad_out;
};

CbamSetup cbam_setup(const CbamArgs& a) {
  const auto d = parse_shape(a.shape);
  const nn::Shape4 shape{d[0], d[1], d[2], d[3]};
  nn::CbamParams p;
  if (!a.params.empty()) {
    p = nn::load_params(a.params);
  } else if (a.zero_weights) {
    p = nn::CbamParams::zeros(shape.c, a.reduction, a.kernel);
  } else {
    p = nn::CbamParams::random(shape.c, a.reduction, derive_seed(a.common.seed, 1), a.kernel);
  }
  return {nn::Tensor4::uniform(shape, -1.0, 1.0, derive_seed(a.common.seed, 0)), std::move(p),
          nn::Tensor4::uniform(shape, -1.0, 1.0, derive_seed(a.common.seed, 2))};
}

void cbam_check_cmd(const CbamArgs& a, std::ostream& out) {
  const CbamSetup s = cbam_setup(a);
  if (!a.save_params.empty()) nn::save_params(a.save_params, s.params);
  const nn::GradReport r = nn::cbam_grad_check(s.input, s.params, s.grad_out, a.step);
  json j = nn::grad_report_to_json(r);
  j["tolerance"] = a.tol;
  j["passed"] = r.max_rel_err <= a.tol;
  emit(a.common, out, dump(j));
  if (r.max_rel_err > a.tol) throw ToleranceExceeded("cbam-check: max relative error above tolerance");
}

struct BenchArgs {
  CbamArgs cbam;
  std::string workload{"cbam"};
  std::size_t warmup{5};
  std::size_t iters{50};
  double sleep_ms{20.0};
};

void bench_cmd(const BenchArgs& a, std::ostream& out) {
  std::function<void()> work;
  std::optional<CbamSetup> setup;
  std::vector<double> ps;
  std::vector<int> ys;
  if (a.workload == "cbam") {
    setup = cbam_setup(a.cbam);
    work = [&] {
      const auto fwd = nn::cbam_forward(setup->input, setup->params);
      static_cast<void>(fwd);
    };
  } else if (a.workload == "focal") {
    Rng rng(a.cbam.common.seed);
    for (int i = 0; i < 100000; ++i) {
      ps.push_back(uniform(rng, 0.0, 1.0));
      ys.push_back(static_cast<int>(uniform_index(rng, 2)));
    }
    work = [&] { static_cast<void>(nn::focal_loss_mean(ps, ys, {})); };
  } else {
    work = [&] { std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(a.sleep_ms)); };
  }
  const BenchResult r = fps_benchmark(work, a.warmup, a.iters);
  emit(a.cbam.common, out,
       dump({{"workload", a.workload}, {"iterations", r.iterations}, {"mean_ms", r.mean_ms}, {"fps", r.fps}}));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anchor clustering, CBAM, focal loss, augmentation and mAP tooling for detection research", "tlkit"};
  app.set_config("--config", "", "key=value file; use `[subcommand]` sections or `subcommand.key=value`");
  app.require_subcommand(1);

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "Per-class counts, mean sizes and a (w,h) histogram");
  add_data(c_stats, stats.data);
  add_out(c_stats, stats.common);
  add_format(c_stats, stats.common, {"json", "csv"});
  c_stats->add_option("--bins", stats.bins, "Histogram bins per axis")->check(CLI::PositiveNumber)->capture_default_str();
  c_stats->add_option("--histogram", stats.histogram, "Also write the histogram grid as CSV here");

  SplitArgs split;
  auto* c_split = app.add_subcommand("split", "Seeded train/val/test split");
  add_data(c_split, split.data);
  add_seed(c_split, split.common);
  add_out(c_split, split.common);
  c_split->add_option("--ratios", split.ratios, "train,val,test weights")->capture_default_str();
  c_split->add_option("--lists-dir", split.lists_dir, "Also write train.txt, val.txt and test.txt here");

  AugmentArgs augment;
  auto* c_aug = app.add_subcommand("augment", "Box-aware augmentation, one copy per (image, op)");
  add_data(c_aug, augment.data);
  add_seed(c_aug, augment.common);
  add_out(c_aug, augment.common);
  c_aug->add_option("--ops", augment.ops,
                    "Ops separated by ';': hflip, vflip, invert, affine:rotate=A,scale=S,tx=X,ty=Y, "
                    "blur:sigma=S, brightness:delta=D, contrast:factor=F; values may be ranges lo..hi")
      ->required();
  c_aug->add_option("--out-dir", augment.out_dir, "Directory for the augmented dataset")->required();
  c_aug->add_flag("--skip-originals", augment.skip_originals, "Do not copy the original images into --out-dir");

  KMeansArgs anchors;
  auto* c_anchors = app.add_subcommand("anchors", "k-means anchors grouped into small/medium/large");
  add_kmeans(c_anchors, anchors, true);
  add_format(c_anchors, anchors.common, {"json", "yolo", "report"});

  KMeansArgs compare;
  auto* c_compare = app.add_subcommand("compare-metrics", "Euclidean vs 1-IoU anchors side by side");
  add_kmeans(c_compare, compare, false);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "AP per class, mAP@0.5 and mAP@0.5:0.95");
  add_data(c_eval, eval.gt, "--gt");
  add_out(c_eval, eval.common);
  add_format(c_eval, eval.common, {"json", "csv"});
  c_eval->add_option("--dets", eval.dets, "Detections: image_id class_id confidence x1 y1 x2 y2")
      ->required()
      ->check(CLI::ExistingFile);
  c_eval->add_option("--sizes", eval.sizes, "Image size manifest (image_id width height); images are not read")
      ->check(CLI::ExistingFile);
  c_eval->add_option("--iou", eval.iou, "IoU threshold of the confusion counts")->capture_default_str();
  c_eval->add_option("--conf", eval.conf, "Operating confidence of the confusion counts")->capture_default_str();
  c_eval->add_option("--pr-curves", eval.pr_curves, "Also write IoU 0.5 PR curves as CSV here");

  FocalArgs focal;
  auto* c_focal = app.add_subcommand("focal", "Binary focal loss and its derivative");
  add_out(c_focal, focal.common);
  c_focal->add_option("--p", focal.p, "Predicted probability of the positive class");
  c_focal->add_option("--y", focal.y, "Label, 0 or 1")->check(CLI::IsMember({0, 1}))->capture_default_str();
  c_focal->add_option("--gamma", focal.gamma, "Focusing exponent")->capture_default_str();
  c_focal->add_option("--alpha", focal.alpha, "Positive-class weight")->capture_default_str();
  c_focal->add_option("--input", focal.input, "File of `p y` lines; reports the batch mean")->check(CLI::ExistingFile);

  CbamArgs cbam;
  cbam.reduction = 16;
  auto* c_cbam = app.add_subcommand("cbam-check", "CBAM backward vs central finite differences");
  add_seed(c_cbam, cbam.common);
  add_out(c_cbam, cbam.common);
  add_cbam(c_cbam, cbam);
  c_cbam->add_option("--step", cbam.step, "Finite-difference step")->capture_default_str();
  c_cbam->add_option("--tol", cbam.tol, "Maximum relative error")->capture_default_str();
  c_cbam->add_option("--save-params", cbam.save_params, "Write the parameters used as a blob");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Mean latency and FPS of a workload");
  add_seed(c_bench, bench.cbam.common);
  add_out(c_bench, bench.cbam.common);
  add_cbam(c_bench, bench.cbam);
  c_bench->add_option("--workload", bench.workload, "cbam forward, focal batch, or sleep")
      ->check(CLI::IsMember({"cbam", "focal", "sleep"}))
      ->capture_default_str();
  c_bench->add_option("--warmup", bench.warmup, "Untimed iterations")->capture_default_str();
  c_bench->add_option("--iters", bench.iters, "Timed iterations")->check(CLI::PositiveNumber)->capture_default_str();
  c_bench->add_option("--sleep-ms", bench.sleep_ms, "Duration of the sleep workload")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (c_stats->parsed()) stats_cmd(stats, out);
    if (c_split->parsed()) split_cmd(split, out);
    if (c_aug->parsed()) augment_cmd(augment, out);
    if (c_anchors->parsed()) anchors_cmd(anchors, out);
    if (c_compare->parsed()) compare_cmd(compare, out);
    if (c_eval->parsed()) eval_cmd(eval, out);
    if (c_focal->parsed()) focal_cmd(focal, out);
    if (c_cbam->parsed()) cbam_check_cmd(cbam, out);
    if (c_bench->parsed()) bench_cmd(bench, out);
  } catch (const ToleranceExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kOk;
}

}  // namespace tlkit::cli
