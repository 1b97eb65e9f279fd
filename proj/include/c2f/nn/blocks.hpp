#pragma once

#include <array>
#include <string>
#include <vector>

#include "c2f/nn/layers.hpp"

namespace c2f::nn {

/// Backbone outputs f1..f5 at strides 2, 4, 8, 16, 32.
/// Low-level group {f1, f2, f3}; high-level group {f3, f4, f5}.
struct FeaturePyramid {
  std::array<Tensor, 5> levels;

  const Tensor& f(std::size_t i) const { return levels.at(i - 1); }
};

/// Five stages of [3x3 stride-2 conv + BN + ReLU, then one residual 3x3 block].
class Backbone {
 public:
  Backbone(ParamSet& params, const std::string& name,
           const std::array<std::size_t, 5>& widths, ParamInit& init);

  FeaturePyramid operator()(const ForwardContext& ctx, const Tensor& image) const;

 private:
  struct Stage {
    ConvBn down;
    ConvBn residual;
  };
  std::vector<Stage> stages_;
};

/// Receptive field block.
///
/// Branch k (1-based) is a 1x1 reduction to `out` channels, then for k >= 2 a
/// (2k-1)x(2k-1) conv, then for k > 2 a 3x3 conv with dilation 2k-1. All
/// branches but the last are concatenated and squeezed by a 1x1 conv; the last
/// branch is added and the sum goes through ReLU. Every conv is conv + BN.
class Rfb {
 public:
  Rfb(ParamSet& params, const std::string& name, std::size_t in,
      std::size_t out, std::size_t branches, ParamInit& init);

  Tensor operator()(const ForwardContext& ctx, const Tensor& x) const;

 private:
  std::size_t in_;
  std::vector<std::vector<ConvBn>> branches_;
  ConvBn squeeze_;
};

/// Multi-scale channel attention: sigmoid(local(x) + broadcast(global(GAP(x)))).
///
/// Both branches run the same pointwise bottleneck
/// (1x1 C->C/r, BN, ReLU, 1x1 C/r->C, BN) with shared weights. The global
/// branch keeps its own batch-norm running statistics (`.global_bn1/2`).
class Msca {
 public:
  Msca(ParamSet& params, const std::string& name, std::size_t channels,
       std::size_t reduction, ParamInit& init);

  Tensor operator()(const ForwardContext& ctx, const Tensor& x) const;

 private:
  Tensor local(const ForwardContext& ctx, const Tensor& x) const;
  // (n, C, 1, 1), before broadcasting.
  Tensor global(const ForwardContext& ctx, const Tensor& x) const;

  std::size_t channels_;
  Conv reduce_;
  BatchNorm bn1_;
  Conv restore_;
  BatchNorm bn2_;
  mutable ops::BatchNormState global1_, global2_;
};

/// Attention-induced cross-level fusion.
class Acfm {
 public:
  Acfm(ParamSet& params, const std::string& name, std::size_t channels,
       std::size_t reduction, ParamInit& init);

  // M(Fa + up(Fb)) * Fa + (1 - M(Fa + up(Fb))) * up(Fb), before the output conv.
  Tensor fuse(const ForwardContext& ctx, const Tensor& fa, const Tensor& fb) const;
  Tensor operator()(const ForwardContext& ctx, const Tensor& fa,
                    const Tensor& fb) const;

 private:
  Msca msca_;
  ConvBn out_;
};

/// Dual-branch global context module.
class Dgcm {
 public:
  Dgcm(ParamSet& params, const std::string& name, std::size_t channels,
       std::size_t reduction, ParamInit& init);

  Tensor operator()(const ForwardContext& ctx, const Tensor& f) const;

 private:
  ConvBn full_;
  Msca full_msca_;
  ConvBn pooled_;
  Msca pooled_msca_;
  ConvBn merge_;
  ConvBn out_;
};

/// Multi-scale residual block: X + fuse(cat(3x3 stream, 5x5 stream)).
class Mrb {
 public:
  Mrb(ParamSet& params, const std::string& name, std::size_t channels,
      ParamInit& init);

  Tensor operator()(const ForwardContext& ctx, const Tensor& x) const;

 private:
  std::size_t channels_;
  ConvBn conv3_;
  DeconvBn deconv3_;
  ConvBn conv5_;
  DeconvBn deconv5_;
  ConvBn fuse_;
};

/// Camouflage inference head: 1x1 -> MRB -> 1x1 -> MRB -> 1x1 (to one logit map).
class Cim {
 public:
  Cim(ParamSet& params, const std::string& name, std::size_t channels,
      ParamInit& init);

  Tensor operator()(const ForwardContext& ctx, const Tensor& x) const;

 private:
  std::size_t channels_;
  Conv in_;
  Mrb mrb1_;
  Conv mid_;
  Mrb mrb2_;
  Conv out_;
};

/// Gates f1..f3 with sigmoid(f_D), runs each through a 4-branch RFB and merges
/// them at f1's resolution into `out` channels.
class Refinement {
 public:
  Refinement(ParamSet& params, const std::string& name,
             const std::array<std::size_t, 3>& level_widths, std::size_t width,
             std::size_t out, ParamInit& init);

  // Per-level R(f_i * gate) before the merge; used by the merge and by tests.
  std::array<Tensor, 3> gated_features(const ForwardContext& ctx,
                                       const FeaturePyramid& pyramid,
                                       const Tensor& coarse) const;
  Tensor operator()(const ForwardContext& ctx, const FeaturePyramid& pyramid,
                    const Tensor& coarse) const;

 private:
  std::vector<Rfb> rfbs_;
  ConvBn merge12_;
  ConvBn merge123_;
};

}  // namespace c2f::nn
