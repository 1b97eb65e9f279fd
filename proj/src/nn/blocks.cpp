#include "c2f/nn/blocks.hpp"

#include "c2f/errors.hpp"

namespace c2f::nn {

using ops::ConvSpec;

namespace {

Tensor resize_to(const ForwardContext& ctx, const Tensor& x, const Tensor& like) {
  return ops::upsample_bilinear(ctx.graph, x, like.shape().h, like.shape().w);
}

void require_channels(const char* block, const Tensor& x, std::size_t expected) {
  if (x.shape().c != expected) {
    throw DimensionError(std::string(block) + " expects " + std::to_string(expected) +
                         " channels, got " + x.shape().str());
  }
}

}  // namespace

Backbone::Backbone(ParamSet& params, const std::string& name,
                   const std::array<std::size_t, 5>& widths, ParamInit& init) {
  std::size_t in = 3;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string stage = name + ".s" + std::to_string(i + 1);
    Stage s{ConvBn(params, stage + ".down", ConvSpec::square(in, widths[i], 3, 2, 1), true, init),
            ConvBn(params, stage + ".residual", ConvSpec::same(widths[i], widths[i], 3), false,
                   init)};
    stages_.push_back(std::move(s));
    in = widths[i];
  }
}

FeaturePyramid Backbone::operator()(const ForwardContext& ctx,
                                    const Tensor& image) const {
  const Shape s = image.shape();
  if (s.c != 3) throw DimensionError("backbone expects 3-channel images, got " + s.str());
  if (s.h == 0 || s.w == 0 || s.h % 32 != 0 || s.w % 32 != 0) {
    throw InvalidInputError("image sides must be positive multiples of 32, got " + s.str());
  }
  FeaturePyramid pyramid;
  Tensor x = image;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    Tensor down = stages_[i].down(ctx, x);
    x = ops::relu(ctx.graph, ops::add(ctx.graph, down, stages_[i].residual(ctx, down)));
    pyramid.levels[i] = x;
  }
  return pyramid;
}

Rfb::Rfb(ParamSet& params, const std::string& name, std::size_t in,
         std::size_t out, std::size_t branches, ParamInit& init)
    : in_(in) {
  if (branches < 2) throw InvalidSpecError("RFB needs at least two branches");
  for (std::size_t k = 1; k <= branches; ++k) {
    const std::string prefix = name + ".b" + std::to_string(k);
    std::vector<ConvBn> layers;
    layers.emplace_back(params, prefix + ".0", ConvSpec::square(in, out, 1), false, init);
    if (k >= 2) {
      const std::size_t kernel = 2 * k - 1;
      layers.emplace_back(params, prefix + ".1",
                          ConvSpec::square(out, out, kernel, 1, k - 1), false, init);
    }
    if (k > 2) {
      const std::size_t rate = 2 * k - 1;
      layers.emplace_back(params, prefix + ".2", ConvSpec::square(out, out, 3, 1, rate, rate),
                          false, init);
    }
    branches_.push_back(std::move(layers));
  }
  squeeze_ = ConvBn(params, name + ".squeeze",
                    ConvSpec::square((branches - 1) * out, out, 1), false, init);
}

Tensor Rfb::operator()(const ForwardContext& ctx, const Tensor& x) const {
  require_channels("RFB", x, in_);
  std::vector<Tensor> outputs;
  for (const auto& branch : branches_) {
    Tensor y = x;
    for (const auto& layer : branch) y = layer(ctx, y);
    outputs.push_back(y);
  }
  const Tensor residual = outputs.back();
  outputs.pop_back();
  Tensor merged = squeeze_(ctx, ops::concat_channels(ctx.graph, outputs));
  return ops::relu(ctx.graph, ops::add(ctx.graph, merged, residual));
}

Msca::Msca(ParamSet& params, const std::string& name, std::size_t channels,
           std::size_t reduction, ParamInit& init)
    : channels_(channels) {
  if (reduction == 0 || channels % reduction != 0) {
    throw InvalidSpecError("MSCA channels " + std::to_string(channels) +
                           " not divisible by reduction " + std::to_string(reduction));
  }
  const std::size_t hidden = channels / reduction;
  reduce_ = Conv(params, name + ".reduce", ConvSpec::square(channels, hidden, 1), false, init);
  bn1_ = BatchNorm(params, name + ".bn1", hidden);
  restore_ = Conv(params, name + ".restore", ConvSpec::square(hidden, channels, 1), false, init);
  bn2_ = BatchNorm(params, name + ".bn2", channels);
  global1_ = BatchNorm::register_stats(params, name + ".global_bn1", hidden);
  global2_ = BatchNorm::register_stats(params, name + ".global_bn2", channels);
}

Tensor Msca::local(const ForwardContext& ctx, const Tensor& x) const {
  Tensor h = ops::relu(ctx.graph, bn1_(ctx, reduce_(ctx, x)));
  return bn2_(ctx, restore_(ctx, h));
}

Tensor Msca::global(const ForwardContext& ctx, const Tensor& x) const {
  Tensor pooled = ops::global_avg_pool(ctx.graph, x);
  Tensor h = ops::relu(ctx.graph, bn1_(ctx, reduce_(ctx, pooled), global1_));
  return bn2_(ctx, restore_(ctx, h), global2_);
}

Tensor Msca::operator()(const ForwardContext& ctx, const Tensor& x) const {
  require_channels("MSCA", x, channels_);
  Tensor logits =
      ops::add(ctx.graph, local(ctx, x), ops::expand(ctx.graph, global(ctx, x), x.shape()));
  return ops::sigmoid(ctx.graph, logits);
}

Acfm::Acfm(ParamSet& params, const std::string& name, std::size_t channels,
           std::size_t reduction, ParamInit& init)
    : msca_(params, name + ".msca", channels, reduction, init),
      out_(params, name + ".out", ConvSpec::same(channels, channels, 3), true, init) {}

Tensor Acfm::fuse(const ForwardContext& ctx, const Tensor& fa, const Tensor& fb) const {
  const Shape a = fa.shape();
  const Shape b = fb.shape();
  const bool equal = a.h == b.h && a.w == b.w;
  const bool half = 2 * b.h == a.h && 2 * b.w == a.w;
  if (a.n != b.n || a.c != b.c || !(equal || half)) {
    throw DimensionError("ACFM inputs " + a.str() + " and " + b.str() +
                         " are not a level pair");
  }
  Tensor fb_up = equal ? fb : resize_to(ctx, fb, fa);
  Tensor gate = msca_(ctx, ops::add(ctx.graph, fa, fb_up));
  return ops::add(ctx.graph, ops::mul(ctx.graph, gate, fa),
                  ops::mul(ctx.graph, ops::one_minus(ctx.graph, gate), fb_up));
}

Tensor Acfm::operator()(const ForwardContext& ctx, const Tensor& fa,
                        const Tensor& fb) const {
  return out_(ctx, fuse(ctx, fa, fb));
}

Dgcm::Dgcm(ParamSet& params, const std::string& name, std::size_t channels,
           std::size_t reduction, ParamInit& init)
    : full_(params, name + ".full", ConvSpec::same(channels, channels, 3), true, init),
      full_msca_(params, name + ".full_msca", channels, reduction, init),
      pooled_(params, name + ".pooled", ConvSpec::same(channels, channels, 3), true, init),
      pooled_msca_(params, name + ".pooled_msca", channels, reduction, init),
      merge_(params, name + ".merge", ConvSpec::same(channels, channels, 3), true, init),
      out_(params, name + ".out", ConvSpec::same(channels, channels, 3), true, init) {}

Tensor Dgcm::operator()(const ForwardContext& ctx, const Tensor& f) const {
  const Shape s = f.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw InvalidInputError("DGCM needs even spatial dims, got " + s.str());
  }
  Graph* g = ctx.graph;
  Tensor fc = full_(ctx, f);
  Tensor fcm = ops::mul(g, fc, full_msca_(ctx, fc));
  Tensor fp = pooled_(ctx, ops::avg_pool2d(g, f, 2, 2));
  Tensor fpm = ops::mul(g, fp, pooled_msca_(ctx, fp));
  Tensor fcpm = ops::add(g, fcm, resize_to(ctx, fpm, fcm));
  return out_(ctx, ops::add(g, f, merge_(ctx, fcpm)));
}

Mrb::Mrb(ParamSet& params, const std::string& name, std::size_t channels,
         ParamInit& init)
    : channels_(channels),
      conv3_(params, name + ".conv3", ConvSpec::same(channels, channels, 3), true, init),
      deconv3_(params, name + ".deconv3", channels, 3, init),
      conv5_(params, name + ".conv5", ConvSpec::same(channels, channels, 5), true, init),
      deconv5_(params, name + ".deconv5", channels, 5, init),
      fuse_(params, name + ".fuse", ConvSpec::same(2 * channels, channels, 3), true, init) {}

Tensor Mrb::operator()(const ForwardContext& ctx, const Tensor& x) const {
  require_channels("MRB", x, channels_);
  Tensor s3 = deconv3_(ctx, conv3_(ctx, x));
  Tensor s5 = deconv5_(ctx, conv5_(ctx, x));
  return ops::add(ctx.graph, x, fuse_(ctx, ops::concat_channels(ctx.graph, s3, s5)));
}

Cim::Cim(ParamSet& params, const std::string& name, std::size_t channels,
         ParamInit& init)
    : channels_(channels),
      in_(params, name + ".in", ConvSpec::square(channels, channels, 1), true, init),
      mrb1_(params, name + ".mrb1", channels, init),
      mid_(params, name + ".mid", ConvSpec::square(channels, channels, 1), true, init),
      mrb2_(params, name + ".mrb2", channels, init),
      out_(params, name + ".out", ConvSpec::square(channels, 1, 1), true, init) {}

Tensor Cim::operator()(const ForwardContext& ctx, const Tensor& x) const {
  require_channels("CIM", x, channels_);
  return out_(ctx, mrb2_(ctx, mid_(ctx, mrb1_(ctx, in_(ctx, x)))));
}

Refinement::Refinement(ParamSet& params, const std::string& name,
                       const std::array<std::size_t, 3>& level_widths,
                       std::size_t width, std::size_t out, ParamInit& init) {
  for (std::size_t i = 0; i < 3; ++i) {
    rfbs_.emplace_back(params, name + ".rfb" + std::to_string(i + 1), level_widths[i], width,
                       4, init);
  }
  merge12_ = ConvBn(params, name + ".merge12", ConvSpec::same(2 * width, width, 3), true, init);
  merge123_ = ConvBn(params, name + ".merge123", ConvSpec::same(2 * width, out, 3), true, init);
}

std::array<Tensor, 3> Refinement::gated_features(const ForwardContext& ctx,
                                                 const FeaturePyramid& pyramid,
                                                 const Tensor& coarse) const {
  if (coarse.shape().c != 1) {
    throw DimensionError("refinement gate must be single-channel, got " +
                         coarse.shape().str());
  }
  Graph* g = ctx.graph;
  Tensor gate = ops::sigmoid(g, coarse);
  std::array<Tensor, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor& level = pyramid.levels[i];
    if (level.shape().n != coarse.shape().n) {
      throw DimensionError("refinement gate batch does not match level " +
                           std::to_string(i + 1));
    }
    Tensor level_gate = ops::expand(g, resize_to(ctx, gate, level), level.shape());
    out[i] = rfbs_[i](ctx, ops::mul(g, level, level_gate));
  }
  return out;
}

Tensor Refinement::operator()(const ForwardContext& ctx, const FeaturePyramid& pyramid,
                              const Tensor& coarse) const {
  const auto g = gated_features(ctx, pyramid, coarse);
  Tensor m12 = merge12_(ctx, ops::concat_channels(ctx.graph, g[0], resize_to(ctx, g[1], g[0])));
  return merge123_(ctx, ops::concat_channels(ctx.graph, m12, resize_to(ctx, g[2], g[0])));
}

}  // namespace c2f::nn
