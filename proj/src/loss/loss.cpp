#include "c2f/loss.hpp"

#include <cmath>
#include <vector>

#include "c2f/errors.hpp"
#include "c2f/ops.hpp"

namespace c2f::loss {
namespace {

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + a.shape().str() + " and " +
                         b.shape().str() + " differ");
  }
}

// Images are reduced independently; a sample is one (n) slab.
std::size_t slab(const Shape& s) { return s.c * s.h * s.w; }

// log(1 + exp(-|z|)) + max(z, 0) - z * G
double stable_bce(double z, double target) {
  return std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

Tensor pixel_weights(const Tensor& mask, const PixelWeightOptions& options) {
  if (options.kernel % 2 == 0) {
    throw InvalidSpecError("pixel weight kernel must be odd, got " +
                           std::to_string(options.kernel));
  }
  for (double v : mask.data()) {
    if (v != 0.0 && v != 1.0) throw ContractError("pixel_weights needs a binary mask");
  }
  const Tensor local =
      ops::avg_pool2d(nullptr, mask, options.kernel, 1, (options.kernel - 1) / 2);
  Tensor w(mask.shape());
  auto out = w.mutable_data();
  auto ld = local.data();
  auto md = mask.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 1.0 + options.lambda * std::abs(ld[i] - md[i]);
  }
  return w;
}

Tensor weighted_bce(Graph* g, const Tensor& logits, const Tensor& mask,
                    const Tensor& weights) {
  require_same("weighted_bce", logits, mask);
  require_same("weighted_bce", logits, weights);
  const std::size_t n = logits.shape().n;
  const std::size_t per = slab(logits.shape());
  auto z = logits.data();
  auto t = mask.data();
  auto w = weights.data();
  std::vector<double> wsum(n, 0.0);
  double total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    double num = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      num += w[i] * stable_bce(z[i], t[i]);
      wsum[b] += w[i];
    }
    total += num / wsum[b];
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  if (should_record(g, {&logits})) {
    g->record(out, [logits, mask, weights, out, wsum, n, per]() {
      const double seed = out.grad()[0] / static_cast<double>(n);
      auto gz = logits.grad_buffer();
      auto z = logits.data();
      auto t = mask.data();
      auto w = weights.data();
      for (std::size_t b = 0; b < n; ++b) {
        const double s = seed / wsum[b];
        for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
          gz[i] += s * w[i] * (ops::sigmoid_value(z[i]) - t[i]);
        }
      }
    });
  }
  return out;
}

Tensor weighted_iou(Graph* g, const Tensor& logits, const Tensor& mask,
                    const Tensor& weights) {
  require_same("weighted_iou", logits, mask);
  require_same("weighted_iou", logits, weights);
  const std::size_t n = logits.shape().n;
  const std::size_t per = slab(logits.shape());
  auto z = logits.data();
  auto t = mask.data();
  auto w = weights.data();
  // Per image: a = inter + 1, b = union - inter + 1.
  std::vector<double> num(n), den(n);
  double total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    double inter = 0.0, uni = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      const double p = ops::sigmoid_value(z[i]);
      inter += w[i] * p * t[i];
      uni += w[i] * (p + t[i]);
    }
    num[b] = inter + 1.0;
    den[b] = uni - inter + 1.0;
    total += 1.0 - num[b] / den[b];
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  if (should_record(g, {&logits})) {
    g->record(out, [logits, mask, weights, out, num, den, n, per]() {
      const double seed = out.grad()[0] / static_cast<double>(n);
      auto gz = logits.grad_buffer();
      auto z = logits.data();
      auto t = mask.data();
      auto w = weights.data();
      for (std::size_t b = 0; b < n; ++b) {
        const double a = num[b];
        const double d = den[b];
        for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
          const double p = ops::sigmoid_value(z[i]);
          // d(inter)/dp = w G, d(union - inter)/dp = w (1 - G)
          const double dl_dp = -(w[i] * t[i] * d - a * w[i] * (1.0 - t[i])) / (d * d);
          gz[i] += seed * dl_dp * p * (1.0 - p);
        }
      }
    });
  }
  return out;
}

LossBreakdown total_loss(Graph* g, const Tensor& coarse, const Tensor& fine,
                         const Tensor& mask, const PixelWeightOptions& options) {
  const Tensor w = pixel_weights(mask, options);
  LossBreakdown out;
  Tensor bc = weighted_bce(g, coarse, mask, w);
  Tensor ic = weighted_iou(g, coarse, mask, w);
  Tensor bf = weighted_bce(g, fine, mask, w);
  Tensor iff = weighted_iou(g, fine, mask, w);
  out.bce_coarse = bc.item();
  out.iou_coarse = ic.item();
  out.bce_fine = bf.item();
  out.iou_fine = iff.item();
  out.total = ops::add(g, ops::add(g, bc, ic), ops::add(g, bf, iff));
  return out;
}

}  // namespace c2f::loss
