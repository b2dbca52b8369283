#include "tlkit/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "tlkit/error.hpp"
#include "tlkit/random.hpp"

namespace tlkit::nn {

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor4::Tensor4(Shape4 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("Tensor4: " + std::to_string(data_.size()) + " values for shape " + to_string(shape_));
  }
}

Tensor4 Tensor4::uniform(Shape4 shape, double lo, double hi, std::uint64_t seed) {
  Tensor4 t(shape);
  Rng rng(seed);
  for (auto& v : t.data_) v = tlkit::uniform(rng, lo, hi);
  return t;
}

bool Tensor4::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace tlkit::nn
