#include "tlkit/nn/cbam.hpp"

#include <cmath>

#include "tlkit/error.hpp"
#include "tlkit/random.hpp"

namespace tlkit::nn {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_input(const Tensor4& f, const CbamParams& p) {
  p.validate();
  const Shape4& s = f.shape();
  if (s.c != p.channels) {
    throw ShapeError("CBAM: input has " + std::to_string(s.c) + " channels, params expect " +
                     std::to_string(p.channels));
  }
  if (s.n == 0 || s.h == 0 || s.w == 0) throw ShapeError("CBAM: empty input " + to_string(s));
  if (!f.all_finite()) throw NumericError("CBAM: non-finite input");
}

struct ChannelPass {
  std::vector<double> avg, max;
  std::vector<std::size_t> max_at;
  std::vector<double> hid_avg, hid_max;
  std::vector<double> scale;
};

ChannelPass channel_pass(const Tensor4& f, const CbamParams& p) {
  const Shape4& s = f.shape();
  const std::size_t hw = s.h * s.w, hid = p.hidden();
  ChannelPass r;
  r.avg.resize(s.n * s.c);
  r.max.resize(s.n * s.c);
  r.max_at.resize(s.n * s.c);
  r.hid_avg.assign(s.n * hid, 0.0);
  r.hid_max.assign(s.n * hid, 0.0);
  r.scale.resize(s.n * s.c);
  const auto data = f.data();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* plane = data.data() + (n * s.c + c) * hw;
      double sum = 0.0, best = plane[0];
      std::size_t at = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        sum += plane[i];
        if (plane[i] > best) {
          best = plane[i];
          at = i;
        }
      }
      r.avg[n * s.c + c] = sum / static_cast<double>(hw);
      r.max[n * s.c + c] = best;
      r.max_at[n * s.c + c] = at;
    }
    for (std::size_t j = 0; j < hid; ++j) {
      double za = 0.0, zm = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) {
        za += p.mlp_w1[j * s.c + c] * r.avg[n * s.c + c];
        zm += p.mlp_w1[j * s.c + c] * r.max[n * s.c + c];
      }
      r.hid_avg[n * hid + j] = za;
      r.hid_max[n * hid + j] = zm;
    }
    for (std::size_t c = 0; c < s.c; ++c) {
      double z = 0.0;
      for (std::size_t j = 0; j < hid; ++j) {
        z += p.mlp_w2[c * hid + j] * (std::max(0.0, r.hid_avg[n * hid + j]) + std::max(0.0, r.hid_max[n * hid + j]));
      }
      r.scale[n * s.c + c] = sigmoid(z);
    }
  }
  return r;
}

struct SpatialPass {
  std::vector<double> pooled;
  std::vector<std::size_t> max_channel;
  std::vector<double> scale;
};

SpatialPass spatial_pass(const Tensor4& f, const CbamParams& p) {
  const Shape4& s = f.shape();
  const std::size_t hw = s.h * s.w, k = p.kernel_size;
  const auto pad = static_cast<std::ptrdiff_t>(p.padding());
  SpatialPass r;
  r.pooled.resize(s.n * 2 * hw);
  r.max_channel.resize(s.n * hw);
  r.scale.resize(s.n * hw);
  const auto data = f.data();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < hw; ++i) {
      double sum = 0.0, best = data[(n * s.c) * hw + i];
      std::size_t at = 0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const double v = data[(n * s.c + c) * hw + i];
        sum += v;
        if (v > best) {
          best = v;
          at = c;
        }
      }
      r.pooled[(n * 2) * hw + i] = sum / static_cast<double>(s.c);
      r.pooled[(n * 2 + 1) * hw + i] = best;
      r.max_channel[n * hw + i] = at;
    }
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        double z = 0.0;
        for (std::size_t plane = 0; plane < 2; ++plane) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto yy = static_cast<std::ptrdiff_t>(y + ky) - pad;
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(s.h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto xx = static_cast<std::ptrdiff_t>(x + kx) - pad;
              if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(s.w)) continue;
              z += p.spatial_kernel[(plane * k + ky) * k + kx] *
                   r.pooled[(n * 2 + plane) * hw + static_cast<std::size_t>(yy) * s.w + static_cast<std::size_t>(xx)];
            }
          }
        }
        r.scale[n * hw + y * s.w + x] = sigmoid(z);
      }
    }
  }
  return r;
}

}  // namespace

void CbamParams::validate() const {
  if (channels == 0 || reduction == 0) throw ShapeError("CBAM: channels and reduction must be positive");
  if (channels % reduction != 0) {
    throw ShapeError("CBAM: channels " + std::to_string(channels) + " not divisible by reduction " +
                     std::to_string(reduction));
  }
  if (kernel_size % 2 == 0) throw ShapeError("CBAM: spatial kernel size must be odd");
  if (mlp_w1.size() != hidden() * channels || mlp_w2.size() != channels * hidden() ||
      spatial_kernel.size() != 2 * kernel_size * kernel_size) {
    throw ShapeError("CBAM: parameter buffers do not match dimensions");
  }
}

CbamParams CbamParams::zeros(std::size_t channels, std::size_t reduction, std::size_t kernel_size) {
  CbamParams p;
  p.channels = channels;
  p.reduction = reduction;
  p.kernel_size = kernel_size;
  if (reduction == 0) throw ShapeError("CBAM: reduction must be positive");
  p.mlp_w1.assign(p.hidden() * channels, 0.0);
  p.mlp_w2.assign(channels * p.hidden(), 0.0);
  p.spatial_kernel.assign(2 * kernel_size * kernel_size, 0.0);
  p.validate();
  return p;
}

CbamParams CbamParams::random(std::size_t channels, std::size_t reduction, std::uint64_t seed,
                              std::size_t kernel_size) {
  CbamParams p = zeros(channels, reduction, kernel_size);
  Rng rng(seed);
  auto fill = [&rng](std::vector<double>& v, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : v) x = uniform(rng, -bound, bound);
  };
  fill(p.mlp_w1, channels);
  fill(p.mlp_w2, p.hidden());
  fill(p.spatial_kernel, 2 * kernel_size * kernel_size);
  return p;
}

std::vector<double> CbamParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  out.insert(out.end(), mlp_w1.begin(), mlp_w1.end());
  out.insert(out.end(), mlp_w2.begin(), mlp_w2.end());
  out.insert(out.end(), spatial_kernel.begin(), spatial_kernel.end());
  return out;
}

CbamParams CbamParams::with_values(const std::vector<double>& flat) const {
  if (flat.size() != parameter_count()) throw ShapeError("CBAM: flat parameter count mismatch");
  CbamParams p = *this;
  auto it = flat.begin();
  for (auto* v : {&p.mlp_w1, &p.mlp_w2, &p.spatial_kernel}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(v->size()), v->begin());
    it += static_cast<std::ptrdiff_t>(v->size());
  }
  return p;
}

Tensor4 channel_attention(const Tensor4& f, const CbamParams& p) {
  check_input(f, p);
  const Shape4& s = f.shape();
  return Tensor4({s.n, s.c, 1, 1}, channel_pass(f, p).scale);
}

Tensor4 spatial_attention(const Tensor4& f, const CbamParams& p) {
  check_input(f, p);
  const Shape4& s = f.shape();
  return Tensor4({s.n, 1, s.h, s.w}, spatial_pass(f, p).scale);
}

CbamForward cbam_forward(const Tensor4& f, const CbamParams& p) {
  check_input(f, p);
  const Shape4& s = f.shape();
  const std::size_t hw = s.h * s.w;

  ChannelPass ch = channel_pass(f, p);
  Tensor4 gated(s);
  auto g = gated.data();
  const auto in = f.data();
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    for (std::size_t i = 0; i < hw; ++i) g[nc * hw + i] = ch.scale[nc] * in[nc * hw + i];
  }

  SpatialPass sp = spatial_pass(gated, p);
  Tensor4 out(s);
  auto o = out.data();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t i = 0; i < hw; ++i) {
        o[(n * s.c + c) * hw + i] = sp.scale[n * hw + i] * g[(n * s.c + c) * hw + i];
      }
    }
  }

  CbamCache cache;
  cache.valid = true;
  cache.shape = s;
  cache.params = p;
  cache.input = f;
  cache.avg = std::move(ch.avg);
  cache.max = std::move(ch.max);
  cache.max_at = std::move(ch.max_at);
  cache.hid_avg = std::move(ch.hid_avg);
  cache.hid_max = std::move(ch.hid_max);
  cache.chan_scale = std::move(ch.scale);
  cache.gated = std::move(gated);
  cache.pooled = std::move(sp.pooled);
  cache.pooled_max_channel = std::move(sp.max_channel);
  cache.spatial_scale = std::move(sp.scale);
  return {std::move(out), std::move(cache)};
}

CbamGradients cbam_backward(const Tensor4& grad_out, const CbamCache& cache) {
  if (!cache.valid) throw ContractError("cbam_backward: cache does not come from a forward pass");
  if (grad_out.shape() != cache.shape) {
    throw ContractError("cbam_backward: grad_out shape " + to_string(grad_out.shape()) +
                        " does not match cached forward shape " + to_string(cache.shape));
  }
  const CbamParams& p = cache.params;
  const Shape4& s = cache.shape;
  const std::size_t hw = s.h * s.w, hid = p.hidden(), k = p.kernel_size;
  const auto pad = static_cast<std::ptrdiff_t>(p.padding());
  const auto go = grad_out.data();
  const auto gated = cache.gated.data();
  const auto in = cache.input.data();

  CbamGradients r{Tensor4(s), CbamParams::zeros(p.channels, p.reduction, p.kernel_size)};
  CbamParams& gp = r.grad_params;

  // out = s * g  =>  dL/dg = grad_out * s, dL/ds = sum_c grad_out * g.
  std::vector<double> d_gated(s.size());
  std::vector<double> d_z(s.n * hw, 0.0);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < hw; ++i) {
      const double sc = cache.spatial_scale[n * hw + i];
      double ds = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const std::size_t at = (n * s.c + c) * hw + i;
        ds += go[at] * gated[at];
        d_gated[at] = go[at] * sc;
      }
      d_z[n * hw + i] = ds * sc * (1.0 - sc);
    }
  }

  // Spatial convolution: kernel gradient and gradient on the pooled planes.
  std::vector<double> d_pooled(s.n * 2 * hw, 0.0);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        const double dz = d_z[n * hw + y * s.w + x];
        for (std::size_t plane = 0; plane < 2; ++plane) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto yy = static_cast<std::ptrdiff_t>(y + ky) - pad;
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(s.h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto xx = static_cast<std::ptrdiff_t>(x + kx) - pad;
              if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(s.w)) continue;
              const std::size_t pi = (n * 2 + plane) * hw + static_cast<std::size_t>(yy) * s.w + static_cast<std::size_t>(xx);
              const std::size_t ki = (plane * k + ky) * k + kx;
              gp.spatial_kernel[ki] += dz * cache.pooled[pi];
              d_pooled[pi] += dz * p.spatial_kernel[ki];
            }
          }
        }
      }
    }
  }
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < hw; ++i) {
      const double dmean = d_pooled[(n * 2) * hw + i] / static_cast<double>(s.c);
      for (std::size_t c = 0; c < s.c; ++c) d_gated[(n * s.c + c) * hw + i] += dmean;
      d_gated[(n * s.c + cache.pooled_max_channel[n * hw + i]) * hw + i] += d_pooled[(n * 2 + 1) * hw + i];
    }
  }

  // g = a * f  =>  dL/df = dL/dg * a, dL/da = sum_hw dL/dg * f.
  auto gi = r.grad_in.data();
  std::vector<double> d_u(s.n * s.c);
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    const double a = cache.chan_scale[nc];
    double da = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      da += d_gated[nc * hw + i] * in[nc * hw + i];
      gi[nc * hw + i] = d_gated[nc * hw + i] * a;
    }
    d_u[nc] = da * a * (1.0 - a);
  }

  // Shared MLP, once per pooled path.
  std::vector<double> d_hid(hid), d_vec(s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* du = d_u.data() + n * s.c;
    for (int path = 0; path < 2; ++path) {
      const double* pre = (path == 0 ? cache.hid_avg : cache.hid_max).data() + n * hid;
      const double* v = (path == 0 ? cache.avg : cache.max).data() + n * s.c;
      for (std::size_t j = 0; j < hid; ++j) {
        const double act = std::max(0.0, pre[j]);
        double dh = 0.0;
        for (std::size_t c = 0; c < s.c; ++c) {
          gp.mlp_w2[c * hid + j] += du[c] * act;
          dh += p.mlp_w2[c * hid + j] * du[c];
        }
        d_hid[j] = pre[j] > 0.0 ? dh : 0.0;
      }
      for (std::size_t c = 0; c < s.c; ++c) {
        double dv = 0.0;
        for (std::size_t j = 0; j < hid; ++j) {
          gp.mlp_w1[j * s.c + c] += d_hid[j] * v[c];
          dv += p.mlp_w1[j * s.c + c] * d_hid[j];
        }
        d_vec[c] = dv;
      }
      for (std::size_t c = 0; c < s.c; ++c) {
        const std::size_t nc = n * s.c + c;
        if (path == 0) {
          const double share = d_vec[c] / static_cast<double>(hw);
          for (std::size_t i = 0; i < hw; ++i) gi[nc * hw + i] += share;
        } else {
          gi[nc * hw + cache.max_at[nc]] += d_vec[c];
        }
      }
    }
  }
  return r;
}

}  // namespace tlkit::nn
