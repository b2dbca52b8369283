#include "tlkit/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "tlkit/error.hpp"

namespace tlkit {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw InvalidInputError(what);
}

double overlap(double a1, double a2, double b1, double b2) {
  return std::max(0.0, std::min(a2, b2) - std::max(a1, b1));
}

}  // namespace

bool is_valid(const BBoxNorm& b) noexcept {
  return std::isfinite(b.cx) && std::isfinite(b.cy) && b.cx >= 0.0 && b.cx <= 1.0 &&
         b.cy >= 0.0 && b.cy <= 1.0 && b.w > 0.0 && b.w <= 1.0 && b.h > 0.0 && b.h <= 1.0;
}

bool is_valid(const BBoxPix& b) noexcept {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
         std::isfinite(b.y2) && b.x1 < b.x2 && b.y1 < b.y2;
}

bool is_valid(const WH& s) noexcept {
  return std::isfinite(s.w) && std::isfinite(s.h) && s.w > 0.0 && s.h > 0.0;
}

double iou(const BBoxPix& a, const BBoxPix& b) {
  require(is_valid(a) && is_valid(b), "iou: degenerate box");
  const double inter = overlap(a.x1, a.x2, b.x1, b.x2) * overlap(a.y1, a.y2, b.y1, b.y2);
  return inter / (a.area() + b.area() - inter);
}

double iou_distance(const BBoxPix& a, const BBoxPix& b) { return 1.0 - iou(a, b); }

double wh_iou(const WH& a, const WH& b) {
  require(is_valid(a) && is_valid(b), "wh_iou: non-positive dimension");
  const double inter = std::min(a.w, b.w) * std::min(a.h, b.h);
  return inter / (a.area() + b.area() - inter);
}

BBoxPix centered(const WH& s) {
  require(is_valid(s), "centered: non-positive dimension");
  return {-s.w / 2, -s.h / 2, s.w / 2, s.h / 2};
}

BBoxPix to_pixels(const BBoxNorm& b, double img_w, double img_h) {
  require(is_valid(b), "to_pixels: invalid normalized box");
  require(img_w > 0.0 && img_h > 0.0, "to_pixels: non-positive image size");
  return {(b.cx - b.w / 2) * img_w, (b.cy - b.h / 2) * img_h, (b.cx + b.w / 2) * img_w,
          (b.cy + b.h / 2) * img_h};
}

BBoxNorm to_normalized(const BBoxPix& b, double img_w, double img_h) {
  require(is_valid(b), "to_normalized: invalid pixel box");
  require(img_w > 0.0 && img_h > 0.0, "to_normalized: non-positive image size");
  return {(b.x1 + b.x2) / 2 / img_w, (b.y1 + b.y2) / 2 / img_h, (b.x2 - b.x1) / img_w,
          (b.y2 - b.y1) / img_h};
}

}  // namespace tlkit
