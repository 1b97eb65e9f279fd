#include "c2f/nn/layers.hpp"

namespace c2f::nn {

Conv::Conv(ParamSet& params, const std::string& name, const ops::ConvSpec& spec,
           bool with_bias, ParamInit& init)
    : spec_(spec) {
  const std::size_t fan_in = spec.in_channels * spec.kernel_h * spec.kernel_w;
  weight_ = params.add(name + ".weight", init.fan_in_uniform(spec.weight_shape(), fan_in));
  if (with_bias) {
    bias_ = params.add(name + ".bias", Tensor(Shape{1, spec.out_channels, 1, 1}, 0.0));
  }
}

Tensor Conv::operator()(const ForwardContext& ctx, const Tensor& x) const {
  return ops::conv2d(ctx.graph, x, weight_, bias_, spec_);
}

BatchNorm::BatchNorm(ParamSet& params, const std::string& name,
                     std::size_t channels) {
  gamma_ = params.add(name + ".gamma", Tensor(Shape{1, channels, 1, 1}, 1.0));
  beta_ = params.add(name + ".beta", Tensor(Shape{1, channels, 1, 1}, 0.0));
  stats_ = register_stats(params, name, channels);
}

ops::BatchNormState BatchNorm::register_stats(ParamSet& params,
                                              const std::string& name,
                                              std::size_t channels) {
  auto stats = ops::BatchNormState::fresh(channels);
  params.add(name + ".running_mean", stats.running_mean, false);
  params.add(name + ".running_var", stats.running_var, false);
  return stats;
}

Tensor BatchNorm::operator()(const ForwardContext& ctx, const Tensor& x) const {
  return ops::batch_norm(ctx.graph, x, gamma_, beta_, stats_, ctx.training);
}

Tensor BatchNorm::operator()(const ForwardContext& ctx, const Tensor& x,
                             ops::BatchNormState& stats) const {
  return ops::batch_norm(ctx.graph, x, gamma_, beta_, stats, ctx.training);
}

ConvBn::ConvBn(ParamSet& params, const std::string& name,
               const ops::ConvSpec& spec, bool relu, ParamInit& init)
    : conv_(params, name + ".conv", spec, false, init),
      bn_(params, name + ".bn", spec.out_channels),
      relu_(relu) {}

Tensor ConvBn::operator()(const ForwardContext& ctx, const Tensor& x) const {
  Tensor y = bn_(ctx, conv_(ctx, x));
  return relu_ ? ops::relu(ctx.graph, y) : y;
}

DeconvBn::DeconvBn(ParamSet& params, const std::string& name,
                   std::size_t channels, std::size_t kernel, ParamInit& init) {
  spec_ = ops::ConvSpec::square(channels, channels, kernel, 1, (kernel - 1) / 2);
  spec_.transposed = true;
  weight_ = params.add(name + ".deconv.weight",
                       init.fan_in_uniform(spec_.weight_shape(), channels * kernel * kernel));
  bn_ = BatchNorm(params, name + ".bn", channels);
}

Tensor DeconvBn::operator()(const ForwardContext& ctx, const Tensor& x) const {
  Tensor y = ops::conv_transpose2d(ctx.graph, x, weight_, Tensor(), spec_);
  return ops::relu(ctx.graph, bn_(ctx, y));
}

}  // namespace c2f::nn
