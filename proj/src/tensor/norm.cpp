#include <cmath>
#include <vector>

#include "c2f/errors.hpp"
#include "c2f/ops.hpp"

namespace c2f::ops {

BatchNormState BatchNormState::fresh(std::size_t channels) {
  BatchNormState s;
  s.running_mean = Tensor(Shape{1, channels, 1, 1}, 0.0);
  s.running_var = Tensor(Shape{1, channels, 1, 1}, 1.0);
  return s;
}

Tensor batch_norm(Graph* g, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, BatchNormState& state, bool training) {
  const Shape s = x.shape();
  if (gamma.numel() != s.c || beta.numel() != s.c ||
      state.running_mean.numel() != s.c || state.running_var.numel() != s.c) {
    throw DimensionError("batch_norm parameters do not match " +
                         std::to_string(s.c) + " channels");
  }
  const std::size_t count = s.n * s.plane();
  const double eps = state.eps;
  std::vector<double> mean(s.c), inv_std(s.c);
  auto xd = x.data();

  if (training) {
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    for (std::size_t c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const double* p = xd.data() + (n * s.c + c) * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
      }
      const double mu = acc / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const double* p = xd.data() + (n * s.c + c) * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) sq += (p[i] - mu) * (p[i] - mu);
      }
      const double var = sq / static_cast<double>(count);
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + eps);
      // Running variance tracks the unbiased estimate.
      const double unbiased =
          count > 1 ? sq / static_cast<double>(count - 1) : var;
      rm[c] = (1.0 - state.momentum) * rm[c] + state.momentum * mu;
      rv[c] = (1.0 - state.momentum) * rv[c] + state.momentum * unbiased;
    }
  } else {
    auto rm = state.running_mean.data();
    auto rv = state.running_var.data();
    for (std::size_t c = 0; c < s.c; ++c) {
      mean[c] = rm[c];
      inv_std[c] = 1.0 / std::sqrt(rv[c] + eps);
    }
  }

  Tensor out(s);
  auto od = out.mutable_data();
  auto gd = gamma.data();
  auto bd = beta.data();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) {
        od[base + i] = gd[c] * (xd[base + i] - mean[c]) * inv_std[c] + bd[c];
      }
    }
  }

  if (should_record(g, {&x, &gamma, &beta})) {
    g->record(out, [x, gamma, beta, out, mean, inv_std, training]() mutable {
      const Shape s = x.shape();
      const double m = static_cast<double>(s.n * s.plane());
      auto go = out.grad();
      auto xd = x.data();
      auto gd = gamma.data();
      std::span<double> gx, gg, gb;
      if (x.requires_grad()) gx = x.grad_buffer();
      if (gamma.requires_grad()) gg = gamma.grad_buffer();
      if (beta.requires_grad()) gb = beta.grad_buffer();
      for (std::size_t c = 0; c < s.c; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
          const std::size_t base = (n * s.c + c) * s.plane();
          for (std::size_t i = 0; i < s.plane(); ++i) {
            const double xhat = (xd[base + i] - mean[c]) * inv_std[c];
            sum_dy += go[base + i];
            sum_dy_xhat += go[base + i] * xhat;
          }
        }
        if (!gg.empty()) gg[c] += sum_dy_xhat;
        if (!gb.empty()) gb[c] += sum_dy;
        if (gx.empty()) continue;
        const double k = gd[c] * inv_std[c];
        for (std::size_t n = 0; n < s.n; ++n) {
          const std::size_t base = (n * s.c + c) * s.plane();
          for (std::size_t i = 0; i < s.plane(); ++i) {
            if (training) {
              const double xhat = (xd[base + i] - mean[c]) * inv_std[c];
              gx[base + i] +=
                  k * (go[base + i] - sum_dy / m - xhat * sum_dy_xhat / m);
            } else {
              gx[base + i] += k * go[base + i];
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace c2f::ops
