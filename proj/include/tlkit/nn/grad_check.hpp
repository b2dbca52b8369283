#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "tlkit/nn/cbam.hpp"

namespace tlkit::nn {

struct GradReport {
  double max_rel_err{0.0};
  std::size_t coordinate{0};
  double analytic{0.0};
  double numeric{0.0};
  std::size_t dimension{0};
  double step{0.0};
};

/// |a - n| / max(|a|, |n|, 1e-12)
double relative_error(double analytic, double numeric);

using ScalarFunction = std::function<double(std::span<const double>)>;
using GradientFunction = std::function<std::vector<double>(std::span<const double>)>;

/// Compares grad(point) against central differences with the given step on
/// every coordinate. Throws NumericError on non-finite values.
GradReport grad_check(const ScalarFunction& f, const GradientFunction& grad, std::span<const double> point,
                      double step);

/// Checks cbam_backward on L = sum(grad_out * cbam_forward(f, p).out) with
/// respect to the input and every parameter (input coordinates first).
GradReport cbam_grad_check(const Tensor4& f, const CbamParams& p, const Tensor4& grad_out, double step);

nlohmann::json grad_report_to_json(const GradReport& r);

}  // namespace tlkit::nn
