#include "c2f/nn/network.hpp"

namespace c2f::nn {

C2FNet::C2FNet(const NetConfig& config) : config_(config), init_(config.seed) {
  const auto& w = config_.widths;
  const std::size_t cu = config_.unified;
  backbone_ = std::make_unique<Backbone>(params_, "backbone", w, init_);
  rfb3_ = std::make_unique<Rfb>(params_, "rfb3", w[2], cu, 5, init_);
  rfb4_ = std::make_unique<Rfb>(params_, "rfb4", w[3], cu, 5, init_);
  rfb5_ = std::make_unique<Rfb>(params_, "rfb5", w[4], cu, 5, init_);
  acfm1_ = std::make_unique<Acfm>(params_, "acfm1", cu, config_.reduction, init_);
  dgcm1_ = std::make_unique<Dgcm>(params_, "dgcm1", cu, config_.reduction, init_);
  acfm2_ = std::make_unique<Acfm>(params_, "acfm2", cu, config_.reduction, init_);
  dgcm2_ = std::make_unique<Dgcm>(params_, "dgcm2", cu, config_.reduction, init_);
  coarse_head_ = std::make_unique<Conv>(params_, "coarse_head",
                                        ops::ConvSpec::square(cu, 1, 1), true, init_);
  refinement_ = std::make_unique<Refinement>(
      params_, "refine", std::array<std::size_t, 3>{w[0], w[1], w[2]},
      config_.refine_width, config_.head_width, init_);
  cim_ = std::make_unique<Cim>(params_, "cim", config_.head_width, init_);
}

FeaturePyramid C2FNet::pyramid(const ForwardContext& ctx, const Tensor& image) const {
  return (*backbone_)(ctx, image);
}

Tensor C2FNet::cascade(const ForwardContext& ctx, const FeaturePyramid& p) const {
  Tensor r3 = (*rfb3_)(ctx, p.f(3));
  Tensor r4 = (*rfb4_)(ctx, p.f(4));
  Tensor r5 = (*rfb5_)(ctx, p.f(5));
  Tensor d1 = (*dgcm1_)(ctx, (*acfm1_)(ctx, r4, r5));
  Tensor d2 = (*dgcm2_)(ctx, (*acfm2_)(ctx, r3, d1));
  return (*coarse_head_)(ctx, d2);
}

Tensor C2FNet::refine(const ForwardContext& ctx, const FeaturePyramid& p,
                      const Tensor& coarse) const {
  return (*refinement_)(ctx, p, coarse);
}

NetOutputs C2FNet::forward(const ForwardContext& ctx, const Tensor& image) const {
  const FeaturePyramid p = pyramid(ctx, image);
  Tensor coarse = cascade(ctx, p);
  Tensor fine = (*cim_)(ctx, refine(ctx, p, coarse));
  const std::size_t h = image.shape().h;
  const std::size_t w = image.shape().w;
  return NetOutputs{ops::upsample_bilinear(ctx.graph, coarse, h, w),
                    ops::upsample_bilinear(ctx.graph, fine, h, w)};
}

}  // namespace c2f::nn
