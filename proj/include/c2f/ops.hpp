#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "c2f/graph.hpp"
#include "c2f/tensor.hpp"

// Differentiable operator set. Every op takes the Graph to record into as its
// first argument; pass nullptr for inference (nothing is recorded and the
// result does not require grad).
namespace c2f::ops {

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
  bool transposed = false;

  static ConvSpec square(std::size_t in, std::size_t out, std::size_t kernel,
                         std::size_t stride = 1, std::size_t padding = 0,
                         std::size_t dilation = 1);
  // Same padding for odd kernels at stride 1.
  static ConvSpec same(std::size_t in, std::size_t out, std::size_t kernel,
                       std::size_t dilation = 1);

  // Throws InvalidSpecError when the spec cannot produce a non-empty output.
  std::pair<std::size_t, std::size_t> output_size(std::size_t h,
                                                  std::size_t w) const;
  // Expected weight shape: (out, in, kh, kw), or (in, out, kh, kw) if transposed.
  Shape weight_shape() const;
};

Tensor conv2d(Graph* g, const Tensor& x, const Tensor& weight,
              const Tensor& bias, const ConvSpec& spec);
Tensor conv_transpose2d(Graph* g, const Tensor& x, const Tensor& weight,
                        const Tensor& bias, const ConvSpec& spec);

struct BatchNormState {
  Tensor running_mean;  // (1, C, 1, 1)
  Tensor running_var;   // (1, C, 1, 1)
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormState fresh(std::size_t channels);
};

Tensor batch_norm(Graph* g, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, BatchNormState& state, bool training);

enum class PoolKind { average, max, global_average };

// Zero padding counts towards the average (divides by k*k).
Tensor avg_pool2d(Graph* g, const Tensor& x, std::size_t kernel,
                  std::size_t stride, std::size_t padding = 0);
Tensor max_pool2d(Graph* g, const Tensor& x, std::size_t kernel,
                  std::size_t stride);
Tensor global_avg_pool(Graph* g, const Tensor& x);
Tensor pool(Graph* g, const Tensor& x, PoolKind kind, std::size_t kernel,
            std::size_t stride);

// Half-pixel centres, align_corners off.
Tensor upsample_bilinear(Graph* g, const Tensor& x, std::size_t out_h,
                         std::size_t out_w);
// Not differentiable; used to resize binary masks.
Tensor resize_nearest(const Tensor& x, std::size_t out_h, std::size_t out_w);

Tensor add(Graph* g, const Tensor& a, const Tensor& b);
Tensor sub(Graph* g, const Tensor& a, const Tensor& b);
Tensor mul(Graph* g, const Tensor& a, const Tensor& b);
Tensor scale(Graph* g, const Tensor& x, double factor);
Tensor relu(Graph* g, const Tensor& x);
Tensor sigmoid(Graph* g, const Tensor& x);
Tensor one_minus(Graph* g, const Tensor& x);
Tensor concat_channels(Graph* g, std::span<const Tensor> parts);
Tensor concat_channels(Graph* g, const Tensor& a, const Tensor& b);

// Broadcast singleton dims of x up to target (n must match, c/h/w may be 1).
Tensor expand(Graph* g, const Tensor& x, const Shape& target);

Tensor sum(Graph* g, const Tensor& x);
Tensor mean(Graph* g, const Tensor& x);

double sigmoid_value(double z);

}  // namespace c2f::ops
