#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tlkit::nn {

/// Binary focal loss weights. alpha weights positives (negatives get 1 - alpha).
struct FocalParams {
  double alpha{0.25};
  double gamma{2.0};

  /// alpha in (0, 1], gamma >= 0, both finite.
  void validate() const;
};

/// Floor applied to p_t so the loss stays finite.
inline constexpr double kProbabilityFloor = 1e-12;

struct FocalValue {
  double value{0.0};
  /// p_t fell below kProbabilityFloor and was raised to it.
  bool clamped{false};
};

/// -alpha_t * (1 - p_t)^gamma * ln(p_t), where p_t = p for y = 1 and 1 - p
/// otherwise. p must lie in [0, 1], y in {0, 1}.
FocalValue focal_loss(double p, int y, const FocalParams& fp);

/// d focal_loss / dp.
FocalValue focal_loss_grad(double p, int y, const FocalParams& fp);

struct FocalBatch {
  double mean{0.0};
  std::size_t clamped{0};
};

FocalBatch focal_loss_mean(std::span<const double> p, std::span<const int> y, const FocalParams& fp);
/// Gradient of the batch mean with respect to every p.
std::vector<double> focal_loss_mean_grad(std::span<const double> p, std::span<const int> y, const FocalParams& fp);

}  // namespace tlkit::nn
