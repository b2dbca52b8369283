#pragma once

namespace tlkit {

/// Box in normalized center form; fields are fractions of the image size.
struct BBoxNorm {
  double cx{0.0};
  double cy{0.0};
  double w{0.0};
  double h{0.0};

  bool operator==(const BBoxNorm&) const = default;
};

/// Box in pixel corner form. Coordinates are continuous; area is (x2-x1)*(y2-y1).
struct BBoxPix {
  double x1{0.0};
  double y1{0.0};
  double x2{0.0};
  double y2{0.0};

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }

  bool operator==(const BBoxPix&) const = default;
};

/// Box shape without position, in pixels.
struct WH {
  double w{0.0};
  double h{0.0};

  double area() const noexcept { return w * h; }

  bool operator==(const WH&) const = default;
};

bool is_valid(const BBoxNorm& b) noexcept;
bool is_valid(const BBoxPix& b) noexcept;
bool is_valid(const WH& s) noexcept;

// The functions below throw InvalidInputError on boxes that break the
// invariants above.

/// Intersection over union of two positioned boxes. Touching edges give 0.
double iou(const BBoxPix& a, const BBoxPix& b);

/// 1 - IoU, the clustering and matching distance.
double iou_distance(const BBoxPix& a, const BBoxPix& b);

/// IoU of two shapes placed on a common center.
double wh_iou(const WH& a, const WH& b);

/// The shape centered on the origin, so that iou(centered(a), centered(b)) == wh_iou(a, b).
BBoxPix centered(const WH& s);

BBoxPix to_pixels(const BBoxNorm& b, double img_w, double img_h);
BBoxNorm to_normalized(const BBoxPix& b, double img_w, double img_h);

}  // namespace tlkit
