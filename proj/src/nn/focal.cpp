#include "tlkit/nn/focal.hpp"

#include <cmath>
#include <string>

#include "tlkit/error.hpp"

namespace tlkit::nn {

void FocalParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInputError("focal: alpha must lie in (0, 1]");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidInputError("focal: gamma must be >= 0");
}

namespace {

struct Target {
  double pt;
  double alpha_t;
  double sign;  // d p_t / d p
  bool clamped;
};

Target target(double p, int y, const FocalParams& fp) {
  fp.validate();
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInputError("focal: p must lie in [0, 1], got " + std::to_string(p));
  if (y != 0 && y != 1) throw InvalidInputError("focal: label must be 0 or 1");
  Target t{y == 1 ? p : 1.0 - p, y == 1 ? fp.alpha : 1.0 - fp.alpha, y == 1 ? 1.0 : -1.0, false};
  if (t.pt < kProbabilityFloor) {
    t.pt = kProbabilityFloor;
    t.clamped = true;
  }
  return t;
}

}  // namespace

FocalValue focal_loss(double p, int y, const FocalParams& fp) {
  const Target t = target(p, y, fp);
  return {-t.alpha_t * std::pow(1.0 - t.pt, fp.gamma) * std::log(t.pt), t.clamped};
}

FocalValue focal_loss_grad(double p, int y, const FocalParams& fp) {
  const Target t = target(p, y, fp);
  const double q = 1.0 - t.pt;
  // gamma * q^(gamma-1) * ln(p_t) vanishes as p_t -> 1 for every gamma > 0.
  const double focus = (fp.gamma == 0.0 || q == 0.0) ? 0.0 : fp.gamma * std::pow(q, fp.gamma - 1.0) * std::log(t.pt);
  const double d_pt = -t.alpha_t * (-focus + std::pow(q, fp.gamma) / t.pt);
  return {t.sign * d_pt, t.clamped};
}

namespace {

void check_batch(std::span<const double> p, std::span<const int> y) {
  if (p.size() != y.size()) throw InvalidInputError("focal: probability and label counts differ");
  if (p.empty()) throw InvalidInputError("focal: empty batch");
}

}  // namespace

FocalBatch focal_loss_mean(std::span<const double> p, std::span<const int> y, const FocalParams& fp) {
  check_batch(p, y);
  FocalBatch b;
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const FocalValue v = focal_loss(p[i], y[i], fp);
    sum += v.value;
    b.clamped += v.clamped ? 1 : 0;
  }
  b.mean = sum / static_cast<double>(p.size());
  return b;
}

std::vector<double> focal_loss_mean_grad(std::span<const double> p, std::span<const int> y, const FocalParams& fp) {
  check_batch(p, y);
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = focal_loss_grad(p[i], y[i], fp).value / static_cast<double>(p.size());
  return g;
}

}  // namespace tlkit::nn
