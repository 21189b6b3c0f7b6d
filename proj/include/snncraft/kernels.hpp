#pragma once

#include <cstdint>
#include <utility>

#include "snncraft/tensor.hpp"

namespace snncraft {

// Geometry of a 2-D convolution. Input layout is [H, W, C_in], weights are
// [k, k, C_in, C_out], output is [H_out, W_out, C_out]. Zero padding only.
struct ConvSpec {
  std::size_t kernel = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_dim(std::size_t in_dim) const;
  Shape weight_shape() const { return {kernel, kernel, in_channels, out_channels}; }
  Shape out_shape(const Shape& in_shape) const;
  void validate(const Shape& in_shape) const;
};

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const ConvSpec& spec);

// Exact adjoints of conv2d_forward. Returns (grad_x, grad_w).
std::pair<Tensor, Tensor> conv2d_backward(const Tensor& grad_y, const Tensor& x,
                                          const Tensor& w, const ConvSpec& spec);

// y = W^T x with W of shape [D_in, D_out].
Tensor linear_forward(const Tensor& x, const Tensor& w);
std::pair<Tensor, Tensor> linear_backward(const Tensor& grad_y, const Tensor& x,
                                          const Tensor& w);

// Non-overlapping window means over the spatial dims of an [H, W, C] tensor.
Tensor avgpool_forward(const Tensor& x, std::size_t window);
Tensor avgpool_backward(const Tensor& grad_y, std::size_t window);

// Inverted-dropout mask: Bernoulli(1-rate) scaled by 1/(1-rate), so the
// expected value of mask*x equals x. Deterministic per seed.
Tensor dropout_mask(const Shape& shape, double rate, std::uint64_t seed);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& grad_y, const Tensor& x);

// FLOP counts as multiply-accumulate operations, the unit the energy model
// consumes: k^2 * H_out * W_out * C_out * C_in for conv, D_in * D_out for
// linear.
std::uint64_t conv2d_flops(const ConvSpec& spec, const Shape& in_shape);
std::uint64_t linear_flops(std::size_t d_in, std::size_t d_out);

}  // namespace snncraft
