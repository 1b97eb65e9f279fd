#pragma once

#include "c2f/graph.hpp"
#include "c2f/tensor.hpp"

namespace c2f::loss {

struct PixelWeightOptions {
  std::size_t kernel = 15;  // odd
  double lambda = 5.0;
};

/// w = 1 + lambda * |avgpool_k(G) - G|, zero padding counted in the average.
/// G must be strictly {0, 1} (throws ContractError otherwise).
Tensor pixel_weights(const Tensor& mask, const PixelWeightOptions& options = {});

// Both losses take logits, reduce each image separately and average over the
// batch. Shapes must match exactly; masks are (n, 1, h, w) or any shape equal
// to the logits.
Tensor weighted_bce(Graph* g, const Tensor& logits, const Tensor& mask,
                    const Tensor& weights);
// 1 - (inter + 1) / (union - inter + 1), union = sum w (p + G).
Tensor weighted_iou(Graph* g, const Tensor& logits, const Tensor& mask,
                    const Tensor& weights);

struct LossBreakdown {
  double bce_coarse = 0.0;
  double iou_coarse = 0.0;
  double bce_fine = 0.0;
  double iou_fine = 0.0;
  Tensor total;  // scalar, differentiable

  double coarse() const { return bce_coarse + iou_coarse; }
  double fine() const { return bce_fine + iou_fine; }
};

/// Joint objective over the coarse (f_D) and fine (P) heads, both already at
/// the mask resolution.
LossBreakdown total_loss(Graph* g, const Tensor& coarse, const Tensor& fine,
                         const Tensor& mask, const PixelWeightOptions& options = {});

}  // namespace c2f::loss
