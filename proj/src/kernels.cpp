#include "snncraft/kernels.hpp"

#include <algorithm>

#include "snncraft/rng.hpp"

namespace snncraft {

std::size_t ConvSpec::out_dim(std::size_t in_dim) const {
  std::size_t padded = in_dim + 2 * padding;
  if (padded < kernel) {
    throw ConfigError("conv kernel " + std::to_string(kernel) +
                      " larger than padded input " + std::to_string(padded));
  }
  return (padded - kernel) / stride + 1;
}

Shape ConvSpec::out_shape(const Shape& in_shape) const {
  return {out_dim(in_shape[0]), out_dim(in_shape[1]), out_channels};
}

void ConvSpec::validate(const Shape& in_shape) const {
  if (kernel == 0 || stride == 0 || in_channels == 0 || out_channels == 0) {
    throw ConfigError("conv spec fields must be positive");
  }
  if (in_shape.size() != 3) {
    throw ConfigError("conv input must be rank 3 [H,W,C], got " + shape_str(in_shape));
  }
  if (in_shape[2] != in_channels) {
    throw ConfigError("conv input channels " + std::to_string(in_shape[2]) +
                      " != spec in_channels " + std::to_string(in_channels));
  }
  if (out_dim(in_shape[0]) < 1 || out_dim(in_shape[1]) < 1) {
    throw ConfigError("conv output would be empty for input " + shape_str(in_shape));
  }
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const ConvSpec& spec) {
  spec.validate(x.shape);
  if (w.shape != spec.weight_shape()) {
    throw ConfigError("conv weight shape " + shape_str(w.shape) + " != expected " +
                      shape_str(spec.weight_shape()));
  }
  const std::size_t hi = x.shape[0], wi = x.shape[1];
  const std::size_t ci = spec.in_channels, co = spec.out_channels;
  const std::size_t k = spec.kernel, s = spec.stride;
  const long pad = static_cast<long>(spec.padding);
  const std::size_t ho = spec.out_dim(hi), wo = spec.out_dim(wi);

  Tensor y = Tensor::zeros({ho, wo, co});
  for (std::size_t oh = 0; oh < ho; ++oh) {
    for (std::size_t ow = 0; ow < wo; ++ow) {
      double* yp = &y.data[(oh * wo + ow) * co];
      for (std::size_t kh = 0; kh < k; ++kh) {
        long ih = static_cast<long>(oh * s + kh) - pad;
        if (ih < 0 || ih >= static_cast<long>(hi)) continue;
        for (std::size_t kw = 0; kw < k; ++kw) {
          long iw = static_cast<long>(ow * s + kw) - pad;
          if (iw < 0 || iw >= static_cast<long>(wi)) continue;
          const double* xp = &x.data[(static_cast<std::size_t>(ih) * wi +
                                      static_cast<std::size_t>(iw)) * ci];
          const double* wp = &w.data[((kh * k + kw) * ci) * co];
          for (std::size_t c = 0; c < ci; ++c) {
            double xv = xp[c];
            if (xv == 0.0) continue;  // spike maps are mostly zero
            const double* wc = wp + c * co;
            for (std::size_t o = 0; o < co; ++o) yp[o] += xv * wc[o];
          }
        }
      }
    }
  }
  return y;
}

std::pair<Tensor, Tensor> conv2d_backward(const Tensor& grad_y, const Tensor& x,
                                          const Tensor& w, const ConvSpec& spec) {
  spec.validate(x.shape);
  if (grad_y.shape != spec.out_shape(x.shape)) {
    throw ConfigError("conv grad_y shape " + shape_str(grad_y.shape) +
                      " != forward output shape " + shape_str(spec.out_shape(x.shape)));
  }
  const std::size_t hi = x.shape[0], wi = x.shape[1];
  const std::size_t ci = spec.in_channels, co = spec.out_channels;
  const std::size_t k = spec.kernel, s = spec.stride;
  const long pad = static_cast<long>(spec.padding);
  const std::size_t ho = grad_y.shape[0], wo = grad_y.shape[1];

  Tensor gx = Tensor::zeros(x.shape);
  Tensor gw = Tensor::zeros(w.shape);
  for (std::size_t oh = 0; oh < ho; ++oh) {
    for (std::size_t ow = 0; ow < wo; ++ow) {
      const double* gyp = &grad_y.data[(oh * wo + ow) * co];
      for (std::size_t kh = 0; kh < k; ++kh) {
        long ih = static_cast<long>(oh * s + kh) - pad;
        if (ih < 0 || ih >= static_cast<long>(hi)) continue;
        for (std::size_t kw = 0; kw < k; ++kw) {
          long iw = static_cast<long>(ow * s + kw) - pad;
          if (iw < 0 || iw >= static_cast<long>(wi)) continue;
          std::size_t xoff = (static_cast<std::size_t>(ih) * wi +
                              static_cast<std::size_t>(iw)) * ci;
          std::size_t woff = (kh * k + kw) * ci * co;
          for (std::size_t c = 0; c < ci; ++c) {
            const double* wc = &w.data[woff + c * co];
            double* gwc = &gw.data[woff + c * co];
            double xv = x.data[xoff + c];
            double acc = 0.0;
            for (std::size_t o = 0; o < co; ++o) {
              acc += wc[o] * gyp[o];
              gwc[o] += xv * gyp[o];
            }
            gx.data[xoff + c] += acc;
          }
        }
      }
    }
  }
  return {std::move(gx), std::move(gw)};
}

Tensor linear_forward(const Tensor& x, const Tensor& w) {
  if (w.shape.size() != 2 || w.shape[0] != x.size()) {
    throw ConfigError("linear: input size " + std::to_string(x.size()) +
                      " incompatible with weight " + shape_str(w.shape));
  }
  const std::size_t di = w.shape[0], dOut = w.shape[1];
  Tensor y = Tensor::zeros({dOut});
  for (std::size_t i = 0; i < di; ++i) {
    double xv = x.data[i];
    if (xv == 0.0) continue;
    const double* wr = &w.data[i * dOut];
    for (std::size_t j = 0; j < dOut; ++j) y.data[j] += wr[j] * xv;
  }
  return y;
}

std::pair<Tensor, Tensor> linear_backward(const Tensor& grad_y, const Tensor& x,
                                          const Tensor& w) {
  if (w.shape.size() != 2 || w.shape[0] != x.size() || w.shape[1] != grad_y.size()) {
    throw ConfigError("linear backward: inconsistent shapes");
  }
  const std::size_t di = w.shape[0], dOut = w.shape[1];
  Tensor gx = Tensor::zeros(x.shape);
  Tensor gw = Tensor::zeros(w.shape);
  for (std::size_t i = 0; i < di; ++i) {
    const double* wr = &w.data[i * dOut];
    double* gwr = &gw.data[i * dOut];
    double xv = x.data[i];
    double acc = 0.0;
    for (std::size_t j = 0; j < dOut; ++j) {
      acc += wr[j] * grad_y.data[j];
      gwr[j] += xv * grad_y.data[j];
    }
    gx.data[i] = acc;
  }
  return {std::move(gx), std::move(gw)};
}

Tensor avgpool_forward(const Tensor& x, std::size_t window) {
  if (window == 0) throw ConfigError("pool window must be positive");
  if (x.shape.size() != 3) {
    throw ConfigError("avgpool input must be rank 3, got " + shape_str(x.shape));
  }
  if (x.shape[0] % window != 0 || x.shape[1] % window != 0) {
    throw ConfigError("avgpool: spatial dims " + shape_str(x.shape) +
                      " not divisible by window " + std::to_string(window));
  }
  const std::size_t ho = x.shape[0] / window, wo = x.shape[1] / window, c = x.shape[2];
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor y = Tensor::zeros({ho, wo, c});
  for (std::size_t oh = 0; oh < ho; ++oh)
    for (std::size_t ow = 0; ow < wo; ++ow)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (std::size_t dh = 0; dh < window; ++dh)
          for (std::size_t dw = 0; dw < window; ++dw)
            sum += x.at3(oh * window + dh, ow * window + dw, ch);
        y.at3(oh, ow, ch) = sum * inv;
      }
  return y;
}

Tensor avgpool_backward(const Tensor& grad_y, std::size_t window) {
  if (grad_y.shape.size() != 3) {
    throw ConfigError("avgpool backward expects rank 3 grad");
  }
  const std::size_t ho = grad_y.shape[0], wo = grad_y.shape[1], c = grad_y.shape[2];
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor gx = Tensor::zeros({ho * window, wo * window, c});
  for (std::size_t oh = 0; oh < ho; ++oh)
    for (std::size_t ow = 0; ow < wo; ++ow)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double g = grad_y.at3(oh, ow, ch) * inv;
        for (std::size_t dh = 0; dh < window; ++dh)
          for (std::size_t dw = 0; dw < window; ++dw)
            gx.at3(oh * window + dh, ow * window + dw, ch) = g;
      }
  return gx;
}

Tensor dropout_mask(const Shape& shape, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
  }
  Tensor mask = Tensor::full(shape, 1.0);
  if (rate == 0.0) return mask;
  Rng rng(seed);
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  for (double& v : mask.data) v = rng.uniform() < keep ? scale : 0.0;
  return mask;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = std::max(0.0, v);
  return y;
}

Tensor relu_backward(const Tensor& grad_y, const Tensor& x) {
  require_same_shape(grad_y, x, "relu backward");
  Tensor gx = grad_y;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x.data[i] <= 0.0) gx.data[i] = 0.0;
  return gx;
}

std::uint64_t conv2d_flops(const ConvSpec& spec, const Shape& in_shape) {
  std::uint64_t ho = spec.out_dim(in_shape[0]);
  std::uint64_t wo = spec.out_dim(in_shape[1]);
  return static_cast<std::uint64_t>(spec.kernel) * spec.kernel * ho * wo *
         spec.out_channels * spec.in_channels;
}

std::uint64_t linear_flops(std::size_t d_in, std::size_t d_out) {
  return static_cast<std::uint64_t>(d_in) * d_out;
}

}  // namespace snncraft
