#pragma once

#include <string>

#include "c2f/graph.hpp"
#include "c2f/nn/params.hpp"
#include "c2f/ops.hpp"

namespace c2f::nn {

/// Where a forward pass records (graph, or nullptr for inference) and
/// whether batch norm uses batch statistics.
struct ForwardContext {
  Graph* graph = nullptr;
  bool training = false;
};

class Conv {
 public:
  Conv() = default;
  Conv(ParamSet& params, const std::string& name, const ops::ConvSpec& spec,
       bool with_bias, ParamInit& init);

  Tensor operator()(const ForwardContext& ctx, const Tensor& x) const;
  const ops::ConvSpec& spec() const { return spec_; }

 private:
  ops::ConvSpec spec_;
  Tensor weight_;
  Tensor bias_;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParamSet& params, const std::string& name, std::size_t channels);

  Tensor operator()(const ForwardContext& ctx, const Tensor& x) const;
  // Same affine parameters, separately tracked statistics.
  Tensor operator()(const ForwardContext& ctx, const Tensor& x,
                    ops::BatchNormState& stats) const;

  static ops::BatchNormState register_stats(ParamSet& params,
                                            const std::string& name,
                                            std::size_t channels);

 private:
  Tensor gamma_;
  Tensor beta_;
  mutable ops::BatchNormState stats_;
};

/// Convolution (no bias) + batch norm, optionally followed by ReLU.
class ConvBn {
 public:
  ConvBn() = default;
  ConvBn(ParamSet& params, const std::string& name, const ops::ConvSpec& spec,
         bool relu, ParamInit& init);

  Tensor operator()(const ForwardContext& ctx, const Tensor& x) const;

 private:
  Conv conv_;
  BatchNorm bn_;
  bool relu_ = true;
};

/// Transposed convolution (no bias) + batch norm + ReLU.
class DeconvBn {
 public:
  DeconvBn() = default;
  DeconvBn(ParamSet& params, const std::string& name, std::size_t channels,
           std::size_t kernel, ParamInit& init);

  Tensor operator()(const ForwardContext& ctx, const Tensor& x) const;

 private:
  ops::ConvSpec spec_;
  Tensor weight_;
  BatchNorm bn_;
};

}  // namespace c2f::nn
