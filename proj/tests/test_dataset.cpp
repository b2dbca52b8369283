#include <doctest.h>

#include <algorithm>
#include <set>

#include "test_util.hpp"
#include "tlkit/dataset.hpp"
#include "tlkit/error.hpp"
#include "tlkit/image.hpp"

using namespace tlkit;
using testutil::TempDir;
using testutil::write_text;

namespace {

const std::vector<std::string> kFive{"screw", "pole", "insulator", "tower", "vehicle"};

Dataset synthetic(std::size_t n) {
  Dataset d;
  d.class_names = kFive;
  for (std::size_t i = 0; i < n; ++i) {
    d.images.push_back({"img_" + std::to_string(i) + ".png", 1920, 1080, {{static_cast<int>(i % 5), {0.5, 0.5, 0.1, 0.1}}}});
  }
  return d;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("load_dataset maps label lines to annotations") {
    TempDir dir;
    testutil::write_gradient(dir / "a.png", 32, 18);
    testutil::write_gradient(dir / "b.ppm", 20, 10);
    testutil::write_gradient(dir / "sub/c.pgm", 8, 8, 1);
    write_text(dir / "a.txt", "0 0.5 0.5 0.1 0.2\n\n3 0.25 0.75 0.5 0.5\n");
    write_text(dir / "b.txt", "");
    // c has no label file

    const Dataset d = load_dataset(dir.path(), kFive);
    REQUIRE(d.images.size() == 3);
    CHECK(d.images[0].id() == "a");
    CHECK(d.images[0].width == 32);
    CHECK(d.images[0].height == 18);
    REQUIRE(d.images[0].annotations.size() == 2);
    CHECK(d.images[0].annotations[0] == Annotation{0, {0.5, 0.5, 0.1, 0.2}});
    CHECK(d.images[0].annotations[1].class_id == 3);
    CHECK(d.images[1].width == 20);
    CHECK(d.images[1].annotations.empty());
    CHECK(d.images[2].id() == "c");
    CHECK(d.images[2].annotations.empty());
    CHECK(d.annotation_count() == 2);
  }

  TEST_CASE("images/ and labels/ layout") {
    TempDir dir;
    testutil::write_gradient(dir / "images/x.png", 16, 16);
    write_text(dir / "labels/x.txt", "1 0.5 0.5 0.2 0.2\n");
    const Dataset d = load_dataset(dir.path(), kFive);
    REQUIRE(d.images.size() == 1);
    CHECK(d.images[0].annotations.size() == 1);
  }

  TEST_CASE("out-of-range class is a validation error") {
    TempDir dir;
    write_text(dir / "l.txt", "7 0.5 0.5 0.1 0.2\n");
    CHECK_THROWS_AS(read_labels(dir / "l.txt", 5), ValidationError);
    write_text(dir / "m.txt", "-1 0.5 0.5 0.1 0.2\n");
    CHECK_THROWS_AS(read_labels(dir / "m.txt", 5), ValidationError);
    write_text(dir / "n.txt", "0 0.5 0.5 0.0 0.2\n");
    CHECK_THROWS_AS(read_labels(dir / "n.txt", 5), ValidationError);
  }

  TEST_CASE("malformed lines report file and line number") {
    TempDir dir;
    write_text(dir / "bad.txt", "0 0.5 0.5 0.1 0.2\n0 0.5 0.5 0.1\n");
    try {
      read_labels(dir / "bad.txt", 5);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.file() == (dir / "bad.txt").string());
    }
    write_text(dir / "nan.txt", "0 0.5 abc 0.1 0.2\n");
    CHECK_THROWS_AS(read_labels(dir / "nan.txt", 5), ParseError);
    write_text(dir / "frac.txt", "0.5 0.5 0.5 0.1 0.2\n");
    CHECK_THROWS_AS(read_labels(dir / "frac.txt", 5), ParseError);
  }

  TEST_CASE("unsupported image formats are rejected") {
    TempDir dir;
    write_text(dir / "x.png", "not a png at all");
    CHECK_THROWS_AS(read_image_size(dir / "x.png"), FormatError);
    CHECK_THROWS_AS(read_image(dir / "x.png"), FormatError);
    CHECK_THROWS_AS(read_image(dir / "x.jpg"), FormatError);
  }

  TEST_CASE("class names must be non-empty and unique") {
    CHECK_THROWS_AS(validate_class_names({}), ValidationError);
    CHECK_THROWS_AS(validate_class_names({"a", "a"}), ValidationError);
    CHECK_NOTHROW(validate_class_names({"a", "b"}));
  }

  TEST_CASE("PNG and PPM round trip pixels") {
    TempDir dir;
    Image img(5, 3, 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 17);
    write_image(dir / "r.png", img);
    write_image(dir / "r.ppm", img);
    CHECK(read_image(dir / "r.png") == img);
    CHECK(read_image(dir / "r.ppm") == img);
    const ImageSize s = read_image_size(dir / "r.png");
    CHECK(s.width == 5);
    CHECK(s.height == 3);
  }

  TEST_CASE("stats counts, means and histogram") {
    Dataset d;
    d.class_names = {"a", "b"};
    d.images.push_back({"1.png", 100, 100, {{0, {0.5, 0.5, 0.05, 0.05}}, {0, {0.5, 0.5, 0.05, 0.05}}}});
    d.images.push_back({"2.png", 100, 100, {{0, {0.5, 0.5, 0.05, 0.05}}, {1, {0.5, 0.5, 0.05, 0.05}}}});
    const StatsReport r = dataset_stats(d, 10);
    CHECK(r.counts == std::vector<std::size_t>{3, 1});
    CHECK(r.total == 4);
    CHECK(r.mean_w[0] == doctest::Approx(0.05));
    CHECK(r.mean_h[1] == doctest::Approx(0.05));
    // all boxes below 10% of the image: a single bin holds all mass
    CHECK(r.hist[0][0] == 4);
    std::size_t mass = 0;
    for (const auto& row : r.hist) {
      for (auto v : row) mass += v;
    }
    CHECK(mass == 4);

    const std::string csv = stats_to_csv(r);
    CHECK(csv.rfind("class,count,mean_w,mean_h\na,3,", 0) == 0);
    CHECK(csv.find("\nb,1,") != std::string::npos);
    const auto j = stats_to_json(r);
    CHECK(j["annotations"] == 4);
    CHECK(j["classes"][1]["count"] == 1);
  }

  TEST_CASE("stats of an empty dataset") {
    Dataset d;
    d.class_names = kFive;
    const StatsReport r = dataset_stats(d);
    CHECK(r.total == 0);
    CHECK(r.counts == std::vector<std::size_t>(5, 0));
    CHECK(r.mean_w == std::vector<double>(5, 0.0));
  }

  TEST_CASE("full-size boxes land in the last bin") {
    Dataset d;
    d.class_names = {"a"};
    d.images.push_back({"1.png", 10, 10, {{0, {0.5, 0.5, 1.0, 1.0}}}});
    CHECK(dataset_stats(d, 4).hist[3][3] == 1);
  }

  TEST_CASE("split sizes") {
    CHECK(split_sizes(10, {8, 1, 1}) == std::array<std::size_t, 3>{8, 1, 1});
    CHECK(split_sizes(11335, {8, 1, 1}) == std::array<std::size_t, 3>{9067, 1134, 1134});
    CHECK(split_sizes(3, {8, 1, 1}) == std::array<std::size_t, 3>{3, 0, 0});
    CHECK(split_sizes(4290, {0.8, 0.1, 0.1}) == std::array<std::size_t, 3>{3432, 429, 429});
    CHECK_THROWS_AS(split_sizes(10, {8, 0, 1}), InvalidInputError);
  }

  TEST_CASE("split is a seeded partition") {
    const Dataset d = synthetic(97);
    const DatasetSplit a = split_dataset(d, {8, 1, 1}, 41);
    const DatasetSplit b = split_dataset(d, {8, 1, 1}, 41);
    const DatasetSplit c = split_dataset(d, {8, 1, 1}, 42);
    CHECK(a.train.images == b.train.images);
    CHECK(a.val.images == b.val.images);
    CHECK(a.test.images == b.test.images);
    CHECK(a.train.images != c.train.images);

    std::multiset<std::string> seen;
    for (const auto* part : {&a.train, &a.val, &a.test}) {
      for (const auto& img : part->images) seen.insert(img.image_path.string());
    }
    std::multiset<std::string> expected;
    for (const auto& img : d.images) expected.insert(img.image_path.string());
    CHECK(seen == expected);
    CHECK(a.train.class_names == d.class_names);
  }

  TEST_CASE("split needs three images") {
    CHECK_THROWS_AS(split_dataset(synthetic(2), {8, 1, 1}, 1), InfeasibleError);
    CHECK(split_dataset(synthetic(10), {8, 1, 1}, 1).train.images.size() == 8);
  }
}
