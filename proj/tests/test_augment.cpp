#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"
#include "tlkit/augment.hpp"
#include "tlkit/error.hpp"
#include "tlkit/random.hpp"

using namespace tlkit;

namespace {

Image random_image(Rng& rng, int w, int h, int ch) {
  Image img(w, h, ch);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(uniform_index(rng, 256));
  return img;
}

std::vector<Annotation> random_boxes(Rng& rng, std::size_t n) {
  std::vector<Annotation> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = uniform(rng, 0.01, 0.5);
    const double h = uniform(rng, 0.01, 0.5);
    out.push_back({static_cast<int>(uniform_index(rng, 5)),
                   {uniform(rng, w / 2, 1 - w / 2), uniform(rng, h / 2, 1 - h / 2), w, h}});
  }
  return out;
}

bool all_valid(const std::vector<Annotation>& anns) {
  return std::all_of(anns.begin(), anns.end(), [](const Annotation& a) {
    const auto& b = a.box;
    return is_valid(b) && b.cx - b.w / 2 >= -1e-12 && b.cx + b.w / 2 <= 1 + 1e-12 && b.w >= kMinBoxSize &&
           b.h >= kMinBoxSize;
  });
}

}  // namespace

TEST_SUITE("augment") {
  TEST_CASE("hflip mirrors the center") {
    const Image img(8, 4, 3);
    const auto r = augment(img, {{0, {0.3, 0.4, 0.2, 0.1}}}, aug::HFlip{}, 1);
    REQUIRE(r.annotations.size() == 1);
    CHECK(r.annotations[0].box.cx == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(r.annotations[0].box.cy == 0.4);
    CHECK(r.annotations[0].box.w == 0.2);
    CHECK(r.annotations[0].box.h == 0.1);
  }

  TEST_CASE("flips are involutions on pixels and boxes") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      const int w = 1 + static_cast<int>(uniform_index(rng, 40));
      const int h = 1 + static_cast<int>(uniform_index(rng, 40));
      const Image img = random_image(rng, w, h, trial % 2 ? 3 : 1);
      const auto anns = random_boxes(rng, 4);
      for (const AugmentOp op : {AugmentOp{aug::HFlip{}}, AugmentOp{aug::VFlip{}}}) {
        const auto once = augment(img, anns, op, 3);
        const auto twice = augment(once.image, once.annotations, op, 3);
        CHECK(twice.image == img);
        REQUIRE(twice.annotations.size() == anns.size());
        for (std::size_t i = 0; i < anns.size(); ++i) {
          CHECK(twice.annotations[i].class_id == anns[i].class_id);
          // 1 - (1 - c) is exact for c in [0.5, 1] and within one ulp of 0.5 below it
          CHECK(std::abs(twice.annotations[i].box.cx - anns[i].box.cx) <= 0x1p-53);
          CHECK(std::abs(twice.annotations[i].box.cy - anns[i].box.cy) <= 0x1p-53);
          CHECK(twice.annotations[i].box.w == anns[i].box.w);
          CHECK(twice.annotations[i].box.h == anns[i].box.h);
        }
      }
    }
  }

  TEST_CASE("flip involution is exact on dyadic boxes") {
    const std::vector<Annotation> anns{{1, {0.375, 0.25, 0.125, 0.5}}, {2, {0.5, 0.5, 1.0, 1.0}}};
    const Image img(16, 16, 1);
    const auto twice = augment(augment(img, anns, aug::HFlip{}, 0).image,
                               augment(img, anns, aug::HFlip{}, 0).annotations, aug::HFlip{}, 0);
    CHECK(twice.annotations == anns);
  }

  TEST_CASE("90 degree rotation swaps a centered box's sides") {
    const Image img(100, 100, 1);
    aug::Affine rot;
    rot.rotation_deg = 90.0;
    const auto r = augment(img, {{0, {0.5, 0.5, 0.2, 0.4}}}, rot, 0);
    REQUIRE(r.annotations.size() == 1);
    CHECK(r.annotations[0].box.cx == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.annotations[0].box.cy == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.annotations[0].box.w == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(r.annotations[0].box.h == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("90 degree rotation of pixels, counter-clockwise") {
    Image img(3, 3, 1);
    img.at(2, 1, 0) = 200;  // right of center
    aug::Affine rot;
    rot.rotation_deg = 90.0;
    const auto r = augment(img, {}, rot, 0);
    CHECK(r.image.at(1, 0, 0) == 200);  // now above center
    CHECK(r.image.at(2, 1, 0) == 0);
  }

  TEST_CASE("rotated hull encloses the rotated corners") {
    const Image img(200, 100, 1);
    aug::Affine rot;
    rot.rotation_deg = 30.0;
    const auto r = augment(img, {{0, {0.5, 0.5, 0.1, 0.2}}}, rot, 0);
    REQUIRE(r.annotations.size() == 1);
    // 20x20 pixel square, rotated by 30 degrees: hull side 20 (cos30 + sin30)
    const double side = 20.0 * (std::cos(M_PI / 6) + std::sin(M_PI / 6));
    CHECK(r.annotations[0].box.w * 200 == doctest::Approx(side).epsilon(1e-12));
    CHECK(r.annotations[0].box.h * 100 == doctest::Approx(side).epsilon(1e-12));
  }

  TEST_CASE("translation out of frame drops or clamps boxes") {
    const Image img(10, 10, 1);
    aug::Affine shift;
    shift.translate_x = 0.5;
    const auto r = augment(img, {{0, {0.2, 0.5, 0.2, 0.2}}, {1, {0.9, 0.5, 0.1, 0.1}}}, shift, 0);
    REQUIRE(r.annotations.size() == 1);
    CHECK(r.annotations[0].class_id == 0);
    CHECK(r.annotations[0].box.cx == doctest::Approx(0.7));
    CHECK(all_valid(r.annotations));
  }

  TEST_CASE("photometric ops preserve annotations") {
    Rng rng(11);
    const std::vector<AugmentOp> ops{aug::GaussianBlur{{0.5, 2.0}}, aug::Invert{}, aug::Brightness{{-40, 40}},
                                     aug::Contrast{{0.5, 1.5}}};
    for (int trial = 0; trial < 40; ++trial) {
      const Image img = random_image(rng, 12, 9, 3);
      const auto anns = random_boxes(rng, 3);
      for (const auto& op : ops) {
        CHECK(is_photometric(op));
        const auto r = augment(img, anns, op, static_cast<std::uint64_t>(trial));
        CHECK(r.annotations == anns);
        CHECK(r.image.width == img.width);
      }
    }
  }

  TEST_CASE("photometric pixel arithmetic") {
    Image img(2, 1, 1);
    img.at(0, 0, 0) = 10;
    img.at(1, 0, 0) = 250;
    CHECK(augment(img, {}, aug::Invert{}, 0).image.at(0, 0, 0) == 245);
    const auto b = augment(img, {}, aug::Brightness{20.0}, 0).image;
    CHECK(b.at(0, 0, 0) == 30);
    CHECK(b.at(1, 0, 0) == 255);
    const auto c = augment(img, {}, aug::Contrast{2.0}, 0).image;
    CHECK(c.at(0, 0, 0) == 0);
    CHECK(c.at(1, 0, 0) == 255);
    CHECK(augment(img, {}, aug::GaussianBlur{0.0}, 0).image == img);
    Image flat(5, 5, 3, 77);
    CHECK(augment(flat, {}, aug::GaussianBlur{1.5}, 0).image == flat);
  }

  TEST_CASE("geometric outputs always satisfy box invariants") {
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
      aug::Affine a;
      a.rotation_deg = Range{-180, 180};
      a.scale = Range{0.3, 2.0};
      a.translate_x = Range{-0.5, 0.5};
      a.translate_y = Range{-0.5, 0.5};
      const Image img(16, 12, 1);
      const auto r = augment(img, random_boxes(rng, 5), a, static_cast<std::uint64_t>(trial));
      CHECK(all_valid(r.annotations));
    }
  }

  TEST_CASE("seeded determinism") {
    Rng rng(17);
    const Image img = random_image(rng, 20, 20, 3);
    const auto anns = random_boxes(rng, 3);
    aug::Affine a;
    a.rotation_deg = Range{-30, 30};
    const auto r1 = augment(img, anns, a, 99);
    const auto r2 = augment(img, anns, a, 99);
    const auto r3 = augment(img, anns, a, 100);
    CHECK(r1.image == r2.image);
    CHECK(r1.annotations == r2.annotations);
    CHECK(r1.annotations != r3.annotations);
  }

  TEST_CASE("parse ops") {
    const auto ops = parse_augment_ops("hflip; affine:rotate=-10..10,scale=0.9..1.1; blur:sigma=1.5; invert");
    REQUIRE(ops.size() == 4);
    CHECK(std::holds_alternative<aug::HFlip>(ops[0]));
    const auto& a = std::get<aug::Affine>(ops[1]);
    CHECK(a.rotation_deg == Range{-10, 10});
    CHECK(a.scale == Range{0.9, 1.1});
    CHECK(std::get<aug::GaussianBlur>(ops[2]).sigma == Range{1.5});
    CHECK(op_name(ops[3]) == "invert");
    CHECK_THROWS_AS(parse_augment_op("mosaic"), InvalidInputError);
    CHECK_THROWS_AS(parse_augment_op("affine:scale=0"), InvalidInputError);
    CHECK_THROWS_AS(parse_augment_op("blur:sigma=-1"), InvalidInputError);
    CHECK_THROWS_AS(parse_augment_op("affine:spin=3"), InvalidInputError);
  }

  TEST_CASE("augment_dataset adds one copy per image and op") {
    testutil::TempDir dir;
    Dataset d;
    d.class_names = {"a", "b"};
    for (int i = 0; i < 10; ++i) {
      const auto p = dir / ("in/img" + std::to_string(i) + ".png");
      testutil::write_gradient(p, 16, 8);
      d.images.push_back({p, 16, 8, {{i % 2, {0.25, 0.5, 0.25, 0.5}}}});
    }
    const std::vector<AugmentOp> ops{aug::HFlip{}, aug::Brightness{{-10, 10}}};
    const Dataset out = augment_dataset(d, ops, 41, dir / "out");
    REQUIRE(out.images.size() == 30);
    for (std::size_t i = 0; i < 10; ++i) CHECK(out.images[i] == d.images[i]);
    CHECK(out.images[10].image_path == dir / "out/img0_aug0.png");
    CHECK(out.images[10].annotations[0].box.cx == 0.75);
    CHECK(out.images[11].annotations == d.images[0].annotations);
    CHECK(read_labels(dir / "out/img0_aug0.txt", 2) == out.images[10].annotations);
    CHECK(read_image(dir / "out/img0_aug0.png").width == 16);

    const Dataset again = augment_dataset(d, ops, 41, dir / "out2");
    for (std::size_t i = 10; i < 30; ++i) {
      CHECK(read_image(again.images[i].image_path) == read_image(out.images[i].image_path));
    }
    CHECK(augment_dataset(d, {}, 41, dir / "none").images == d.images);
  }

  TEST_CASE("augment_dataset rejects duplicate ids") {
    testutil::TempDir dir;
    Dataset d;
    d.class_names = {"a"};
    testutil::write_gradient(dir / "x/a.png", 4, 4);
    testutil::write_gradient(dir / "y/a.png", 4, 4);
    d.images.push_back({dir / "x/a.png", 4, 4, {}});
    d.images.push_back({dir / "y/a.png", 4, 4, {}});
    CHECK_THROWS_AS(augment_dataset(d, {aug::HFlip{}}, 1, dir / "out"), ValidationError);
  }
}
