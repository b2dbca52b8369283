#include "tlkit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "tlkit/error.hpp"
#include "tlkit/image.hpp"
#include "tlkit/random.hpp"

namespace fs = std::filesystem;

namespace tlkit {

std::size_t Dataset::annotation_count() const {
  std::size_t n = 0;
  for (const auto& img : images) n += img.annotations.size();
  return n;
}

void validate_class_names(const std::vector<std::string>& names) {
  if (names.empty()) throw ValidationError("class list is empty");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw ValidationError("empty class name");
    if (!seen.insert(n).second) throw ValidationError("duplicate class name: " + n);
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t b = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace

std::vector<std::string> read_class_names(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open class list " + file.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) names.push_back(line);
  }
  validate_class_names(names);
  return names;
}

std::vector<Annotation> read_labels(const fs::path& file, std::size_t num_classes) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string(), 0, "cannot open label file");
  std::vector<Annotation> anns;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 5) {
      throw ParseError(file.string(), lineno, "expected `class_id cx cy w h`, got " +
                                                  std::to_string(toks.size()) + " fields");
    }
    long long cls = 0;
    if (!parse_number(toks[0], cls)) throw ParseError(file.string(), lineno, "bad class id");
    Annotation a;
    double* fields[4] = {&a.box.cx, &a.box.cy, &a.box.w, &a.box.h};
    for (int k = 0; k < 4; ++k) {
      if (!parse_number(toks[static_cast<std::size_t>(k) + 1], *fields[k])) {
        throw ParseError(file.string(), lineno, "bad number `" + std::string(toks[k + 1]) + "`");
      }
    }
    const std::string where = file.string() + ":" + std::to_string(lineno) + ": ";
    if (cls < 0 || static_cast<unsigned long long>(cls) >= num_classes) {
      throw ValidationError(where + "class id " + std::to_string(cls) + " out of range for " +
                            std::to_string(num_classes) + " classes");
    }
    a.class_id = static_cast<int>(cls);
    if (!is_valid(a.box)) throw ValidationError(where + "box violates normalized bounds");
    anns.push_back(a);
  }
  return anns;
}

void write_labels(const fs::path& file, const std::vector<Annotation>& anns) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  out << std::setprecision(17);
  for (const auto& a : anns) {
    out << a.class_id << ' ' << a.box.cx << ' ' << a.box.cy << ' ' << a.box.w << ' ' << a.box.h << '\n';
  }
}

fs::path label_path_for(const fs::path& image_path) {
  fs::path sibling = image_path;
  sibling.replace_extension(".txt");
  if (fs::exists(sibling)) return sibling;
  const fs::path dir = image_path.parent_path();
  if (dir.filename() == "images") {
    fs::path alt = dir.parent_path() / "labels" / image_path.filename();
    alt.replace_extension(".txt");
    if (fs::exists(alt)) return alt;
  }
  return sibling;
}

Dataset load_dataset(const fs::path& root_dir, std::vector<std::string> class_names) {
  validate_class_names(class_names);
  if (!fs::is_directory(root_dir)) throw ValidationError("not a directory: " + root_dir.string());

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root_dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  Dataset d;
  d.class_names = std::move(class_names);
  d.images.reserve(files.size());
  for (const auto& f : files) {
    const ImageSize size = read_image_size(f);
    AnnotatedImage img{f, size.width, size.height, {}};
    const fs::path labels = label_path_for(f);
    if (fs::exists(labels)) img.annotations = read_labels(labels, d.class_names.size());
    d.images.push_back(std::move(img));
  }
  return d;
}

StatsReport dataset_stats(const Dataset& d, std::size_t bins) {
  if (bins == 0) throw InvalidInputError("dataset_stats: bins must be positive");
  const std::size_t nc = d.class_names.size();
  StatsReport r;
  r.class_names = d.class_names;
  r.counts.assign(nc, 0);
  r.mean_w.assign(nc, 0.0);
  r.mean_h.assign(nc, 0.0);
  r.bins = bins;
  r.hist.assign(bins, std::vector<std::size_t>(bins, 0));
  r.image_count = d.images.size();

  auto bin_of = [bins](double v) {
    const auto b = static_cast<std::size_t>(std::floor(v * static_cast<double>(bins)));
    return std::min(b, bins - 1);
  };
  for (const auto& img : d.images) {
    for (const auto& a : img.annotations) {
      const auto c = static_cast<std::size_t>(a.class_id);
      if (c >= nc) throw ValidationError("dataset_stats: class id out of range");
      ++r.counts[c];
      r.mean_w[c] += a.box.w;
      r.mean_h[c] += a.box.h;
      ++r.hist[bin_of(a.box.w)][bin_of(a.box.h)];
      ++r.total;
    }
  }
  for (std::size_t c = 0; c < nc; ++c) {
    if (r.counts[c] > 0) {
      r.mean_w[c] /= static_cast<double>(r.counts[c]);
      r.mean_h[c] /= static_cast<double>(r.counts[c]);
    }
  }
  return r;
}

std::string stats_to_csv(const StatsReport& r) {
  std::ostringstream out;
  out << std::setprecision(17) << "class,count,mean_w,mean_h\n";
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    out << r.class_names[c] << ',' << r.counts[c] << ',' << r.mean_w[c] << ',' << r.mean_h[c] << '\n';
  }
  return out.str();
}

std::string histogram_to_csv(const StatsReport& r) {
  std::ostringstream out;
  out << std::setprecision(17) << "w_bin\\h_bin";
  for (std::size_t j = 0; j < r.bins; ++j) out << ',' << static_cast<double>(j) / static_cast<double>(r.bins);
  out << '\n';
  for (std::size_t i = 0; i < r.bins; ++i) {
    out << static_cast<double>(i) / static_cast<double>(r.bins);
    for (std::size_t j = 0; j < r.bins; ++j) out << ',' << r.hist[i][j];
    out << '\n';
  }
  return out.str();
}

nlohmann::json stats_to_json(const StatsReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    classes.push_back({{"class", r.class_names[c]},
                       {"count", r.counts[c]},
                       {"mean_w", r.mean_w[c]},
                       {"mean_h", r.mean_h[c]}});
  }
  return {{"images", r.image_count},
          {"annotations", r.total},
          {"classes", classes},
          {"histogram", {{"bins", r.bins}, {"counts", r.hist}}}};
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  const double sum = ratios.train + ratios.val + ratios.test;
  if (!(ratios.train > 0.0 && ratios.val > 0.0 && ratios.test > 0.0) || !std::isfinite(sum)) {
    throw InvalidInputError("split ratios must be positive and finite");
  }
  const double nd = static_cast<double>(n);
  auto part = [&](double r) { return static_cast<std::size_t>(std::floor(nd * r / sum + 0.5)); };
  std::size_t val = part(ratios.val);
  std::size_t test = part(ratios.test);
  // Rounding up two tiny training ratios could overshoot n.
  while (val + test > n) {
    if (test >= val) {
      --test;
    } else {
      --val;
    }
  }
  return {n - val - test, val, test};
}

DatasetSplit split_dataset(const Dataset& d, const SplitRatios& ratios, std::uint64_t seed) {
  const std::size_t n = d.images.size();
  if (n < 3) throw InfeasibleError("split_dataset: need at least 3 images, got " + std::to_string(n));
  const auto sizes = split_sizes(n, ratios);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[uniform_index(rng, i + 1)]);
  }

  DatasetSplit out{{d.class_names, {}}, {d.class_names, {}}, {d.class_names, {}}};
  Dataset* parts[3] = {&out.train, &out.val, &out.test};
  std::size_t pos = 0;
  for (int p = 0; p < 3; ++p) {
    parts[p]->images.reserve(sizes[static_cast<std::size_t>(p)]);
    for (std::size_t k = 0; k < sizes[static_cast<std::size_t>(p)]; ++k) {
      parts[p]->images.push_back(d.images[order[pos++]]);
    }
  }
  return out;
}

}  // namespace tlkit
