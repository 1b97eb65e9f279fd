#pragma once

#include <array>
#include <cstdint>
#include <memory>

#include "c2f/nn/blocks.hpp"

namespace c2f::nn {

struct NetConfig {
  std::array<std::size_t, 5> widths{16, 24, 32, 48, 64};
  std::size_t unified = 64;      // RFB output width feeding the cascade
  std::size_t refine_width = 32; // modified RFB width in the refinement
  std::size_t head_width = 16;   // refinement output / CIM width
  std::size_t reduction = 4;     // MSCA channel reduction
  std::uint64_t seed = 1;
};

/// Both heads as logits, upsampled to the input resolution.
struct NetOutputs {
  Tensor coarse;  // f_D
  Tensor fine;    // P
};

class C2FNet {
 public:
  explicit C2FNet(const NetConfig& config);

  C2FNet(const C2FNet&) = delete;
  C2FNet& operator=(const C2FNet&) = delete;

  FeaturePyramid pyramid(const ForwardContext& ctx, const Tensor& image) const;
  // f_D at stride 8, before upsampling.
  Tensor cascade(const ForwardContext& ctx, const FeaturePyramid& pyramid) const;
  // Refined 16-channel features at stride 2.
  Tensor refine(const ForwardContext& ctx, const FeaturePyramid& pyramid,
                const Tensor& coarse) const;
  NetOutputs forward(const ForwardContext& ctx, const Tensor& image) const;

  const NetConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  NetConfig config_;
  ParamSet params_;
  ParamInit init_;
  std::unique_ptr<Backbone> backbone_;
  std::unique_ptr<Rfb> rfb3_, rfb4_, rfb5_;
  std::unique_ptr<Acfm> acfm1_, acfm2_;
  std::unique_ptr<Dgcm> dgcm1_, dgcm2_;
  std::unique_ptr<Conv> coarse_head_;
  std::unique_ptr<Refinement> refinement_;
  std::unique_ptr<Cim> cim_;
};

}  // namespace c2f::nn
