#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tlkit/error.hpp"
#include "tlkit/geometry.hpp"
#include "tlkit/random.hpp"

using namespace tlkit;

TEST_SUITE("geometry") {
  TEST_CASE("iou of identical, disjoint and overlapping boxes") {
    const BBoxPix a{0, 0, 2, 2};
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, {5, 5, 6, 6}) == 0.0);
    // intersection 1, union 4 + 4 - 1
    CHECK(iou(a, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  }

  TEST_CASE("iou_distance is one minus iou") {
    const BBoxPix a{0, 0, 2, 2};
    CHECK(iou_distance(a, a) == 0.0);
    CHECK(iou_distance(a, {5, 5, 6, 6}) == 1.0);
    CHECK(iou_distance(a, {1, 1, 3, 3}) == doctest::Approx(6.0 / 7.0).epsilon(1e-15));
  }

  TEST_CASE("touching edges give zero overlap, not an error") {
    CHECK(iou({0, 0, 1, 1}, {1, 0, 2, 1}) == 0.0);
    CHECK(iou({0, 0, 1, 1}, {1, 1, 2, 2}) == 0.0);
  }

  TEST_CASE("degenerate boxes are rejected") {
    CHECK_THROWS_AS(iou({0, 0, 0, 1}, {0, 0, 1, 1}), InvalidInputError);
    CHECK_THROWS_AS(iou({0, 0, 1, 1}, {2, 2, 1, 3}), InvalidInputError);
    CHECK_THROWS_AS(iou_distance({0, 0, 1, 1}, {0, 0, 1, 1 - 1}), InvalidInputError);
    CHECK_THROWS_AS(wh_iou({0, 4}, {4, 4}), InvalidInputError);
    CHECK_THROWS_AS(wh_iou({4, -1}, {4, 4}), InvalidInputError);
  }

  TEST_CASE("wh_iou examples") {
    CHECK(wh_iou({4, 4}, {4, 4}) == 1.0);
    // intersection 2x2 = 4, union 8 + 8 - 4
    CHECK(wh_iou({2, 4}, {4, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    // intersection 10x10 = 100, union 1000 + 1000 - 100
    CHECK(wh_iou({10, 100}, {100, 10}) == doctest::Approx(100.0 / 1900.0).epsilon(1e-15));
  }

  TEST_CASE("co-centered elongated boxes: centers coincide, 1-IoU is large") {
    const BBoxPix a = centered({10, 100});
    const BBoxPix b = centered({100, 10});
    const double center_dist = std::hypot((a.x1 + a.x2) / 2 - (b.x1 + b.x2) / 2, (a.y1 + a.y2) / 2 - (b.y1 + b.y2) / 2);
    CHECK(center_dist == 0.0);
    CHECK(iou_distance(a, b) == doctest::Approx(18.0 / 19.0).epsilon(1e-12));
    CHECK(iou_distance(a, b) > 0.9);
  }

  TEST_CASE("to_pixels examples") {
    CHECK(to_pixels({0.5, 0.5, 1, 1}, 100, 100) == BBoxPix{0, 0, 100, 100});
    const BBoxPix p = to_pixels({0.5, 0.5, 0.2, 0.4}, 100, 200);
    CHECK(p.x1 == doctest::Approx(40));
    CHECK(p.y1 == doctest::Approx(60));
    CHECK(p.x2 == doctest::Approx(60));
    CHECK(p.y2 == doctest::Approx(140));
    CHECK_THROWS_AS(to_pixels({0.5, 0.5, 0, 0.1}, 100, 100), InvalidInputError);
    CHECK_THROWS_AS(to_pixels({0.5, 0.5, 0.1, 0.1}, 0, 100), InvalidInputError);
  }

  TEST_CASE("property: symmetry, bounds, containment, wh_iou equals co-centered iou, round trip") {
    Rng rng(7);
    for (int trial = 0; trial < 2000; ++trial) {
      auto box = [&] {
        const double x = uniform(rng, -50, 50), y = uniform(rng, -50, 50);
        return BBoxPix{x, y, x + uniform(rng, 0.1, 40), y + uniform(rng, 0.1, 40)};
      };
      const BBoxPix a = box(), b = box();
      const double ab = iou(a, b);
      CHECK(ab == iou(b, a));
      CHECK(ab >= 0.0);
      CHECK(ab <= 1.0);
      CHECK(iou(a, a) == 1.0);
      CHECK(iou_distance(a, a) == 0.0);
      CHECK(ab == doctest::Approx(oracle::box_iou({a.x1, a.y1, a.x2, a.y2}, {b.x1, b.y1, b.x2, b.y2})).epsilon(1e-12));

      // b shrunk inside a: iou = smaller / larger area
      const BBoxPix inner{a.x1 + a.width() * 0.25, a.y1 + a.height() * 0.25, a.x2 - a.width() * 0.25,
                          a.y2 - a.height() * 0.25};
      CHECK(iou(a, inner) == doctest::Approx(inner.area() / a.area()).epsilon(1e-12));

      const WH s{uniform(rng, 0.5, 300), uniform(rng, 0.5, 300)};
      const WH t{uniform(rng, 0.5, 300), uniform(rng, 0.5, 300)};
      CHECK(wh_iou(s, t) == iou(centered(s), centered(t)));
      CHECK(wh_iou(s, t) == doctest::Approx(oracle::cocentered_iou({s.w, s.h}, {t.w, t.h})).epsilon(1e-12));

      const BBoxNorm n{uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0.001, 1), uniform(rng, 0.001, 1)};
      const double iw = uniform(rng, 10, 4000), ih = uniform(rng, 10, 4000);
      const BBoxNorm back = to_normalized(to_pixels(n, iw, ih), iw, ih);
      CHECK(std::abs(back.cx - n.cx) <= 1e-9);
      CHECK(std::abs(back.cy - n.cy) <= 1e-9);
      CHECK(std::abs(back.w - n.w) <= 1e-9);
      CHECK(std::abs(back.h - n.h) <= 1e-9);
    }
  }
}
