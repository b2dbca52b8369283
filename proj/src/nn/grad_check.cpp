#include "tlkit/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "tlkit/error.hpp"

namespace tlkit::nn {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-12});
}

GradReport grad_check(const ScalarFunction& f, const GradientFunction& grad, std::span<const double> point,
                      double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidInputError("grad_check: step must be positive");
  std::vector<double> x(point.begin(), point.end());
  const std::vector<double> analytic = grad(x);
  if (analytic.size() != x.size()) throw ShapeError("grad_check: gradient has the wrong length");

  GradReport r;
  r.dimension = x.size();
  r.step = step;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    // Divide by the distance actually stepped, not the nominal 2 * step.
    const double hi = saved + step;
    const double lo = saved - step;
    x[i] = hi;
    const double up = f(x);
    x[i] = lo;
    const double down = f(x);
    x[i] = saved;
    const double numeric = (up - down) / (hi - lo);
    if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) {
      throw NumericError("grad_check: non-finite value at coordinate " + std::to_string(i));
    }
    const double err = relative_error(analytic[i], numeric);
    if (i == 0 || err > r.max_rel_err) {
      r.max_rel_err = err;
      r.coordinate = i;
      r.analytic = analytic[i];
      r.numeric = numeric;
    }
  }
  return r;
}

namespace {

// Neumaier summation keeps the loss noise well below the finite-difference signal.
double weighted_sum(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = a[i] * b[i];
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace

GradReport cbam_grad_check(const Tensor4& f, const CbamParams& p, const Tensor4& grad_out, double step) {
  p.validate();
  if (grad_out.shape() != f.shape()) throw ShapeError("cbam_grad_check: grad_out shape differs from input");
  const std::size_t n_in = f.size();
  const Shape4 shape = f.shape();

  std::vector<double> point(f.data().begin(), f.data().end());
  const auto flat = p.flatten();
  point.insert(point.end(), flat.begin(), flat.end());

  auto unpack = [&](std::span<const double> x) {
    Tensor4 input(shape, std::vector<double>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n_in)));
    CbamParams params = p.with_values(std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(n_in), x.end()));
    return std::pair{std::move(input), std::move(params)};
  };
  const ScalarFunction loss = [&](std::span<const double> x) {
    const auto [input, params] = unpack(x);
    return weighted_sum(cbam_forward(input, params).out.data(), grad_out.data());
  };
  const GradientFunction gradient = [&](std::span<const double> x) {
    const auto [input, params] = unpack(x);
    const auto fwd = cbam_forward(input, params);
    const auto g = cbam_backward(grad_out, fwd.cache);
    std::vector<double> out(g.grad_in.data().begin(), g.grad_in.data().end());
    const auto gp = g.grad_params.flatten();
    out.insert(out.end(), gp.begin(), gp.end());
    return out;
  };
  return grad_check(loss, gradient, point, step);
}

nlohmann::json grad_report_to_json(const GradReport& r) {
  return {{"max_rel_err", r.max_rel_err}, {"coordinate", r.coordinate}, {"analytic", r.analytic},
          {"numeric", r.numeric},         {"dimension", r.dimension},   {"step", r.step}};
}

}  // namespace tlkit::nn
