#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tlkit/nn/tensor.hpp"

namespace tlkit::nn {

/// Weights of one CBAM block: a bias-free shared MLP (channels -> channels/r ->
/// channels, ReLU in between) for channel attention and a two-plane
/// kernel_size x kernel_size convolution for spatial attention.
struct CbamParams {
  std::size_t channels{0};
  std::size_t reduction{16};
  std::size_t kernel_size{7};
  std::vector<double> mlp_w1;          // hidden x channels
  std::vector<double> mlp_w2;          // channels x hidden
  std::vector<double> spatial_kernel;  // 2 x k x k; plane 0 sees the channel mean, plane 1 the max

  std::size_t hidden() const noexcept { return channels / reduction; }
  std::size_t padding() const noexcept { return kernel_size / 2; }
  std::size_t parameter_count() const noexcept {
    return mlp_w1.size() + mlp_w2.size() + spatial_kernel.size();
  }

  /// Throws ShapeError if the buffers disagree with the dimensions, c is not
  /// divisible by r, or the kernel size is even.
  void validate() const;

  static CbamParams zeros(std::size_t channels, std::size_t reduction = 16, std::size_t kernel_size = 7);
  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor, drawn in the order w1, w2, kernel.
  static CbamParams random(std::size_t channels, std::size_t reduction, std::uint64_t seed,
                           std::size_t kernel_size = 7);

  /// w1, w2, kernel concatenated.
  std::vector<double> flatten() const;
  /// Inverse of flatten for a block with the same dimensions.
  CbamParams with_values(const std::vector<double>& flat) const;

  bool operator==(const CbamParams&) const = default;
};

/// sigmoid(MLP(avg_pool(f)) + MLP(max_pool(f))), dims (n, c, 1, 1).
Tensor4 channel_attention(const Tensor4& f, const CbamParams& p);

/// sigmoid(conv([mean_c(f); max_c(f)])) with stride 1 and zero padding, dims (n, 1, h, w).
Tensor4 spatial_attention(const Tensor4& f, const CbamParams& p);

/// Intermediates of one forward pass, consumed by cbam_backward.
struct CbamCache {
  bool valid{false};
  Shape4 shape;
  CbamParams params;
  Tensor4 input;
  std::vector<double> avg, max;                 // n x c pooled vectors
  std::vector<std::size_t> max_at;              // n x c, flat h*w offset of the max
  std::vector<double> hid_avg, hid_max;         // n x hidden, before ReLU
  std::vector<double> chan_scale;               // n x c
  Tensor4 gated;                                // channel-scaled input
  std::vector<double> pooled;                   // n x 2 x h x w
  std::vector<std::size_t> pooled_max_channel;  // n x h x w
  std::vector<double> spatial_scale;            // n x h x w
};

struct CbamForward {
  Tensor4 out;
  CbamCache cache;
};

/// out = s * (a * f), with a the channel scale broadcast over h, w and s the
/// spatial scale of the channel-gated map broadcast over c.
CbamForward cbam_forward(const Tensor4& f, const CbamParams& p);

struct CbamGradients {
  Tensor4 grad_in;
  /// Same layout as the parameters.
  CbamParams grad_params;
};

/// Exact gradients of sum(grad_out * out). Max pooling routes gradient to the
/// first maximal element. Throws ContractError on an empty cache or a
/// grad_out whose shape differs from the cached forward pass.
CbamGradients cbam_backward(const Tensor4& grad_out, const CbamCache& cache);

}  // namespace tlkit::nn
