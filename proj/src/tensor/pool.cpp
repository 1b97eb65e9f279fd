#include <algorithm>
#include <cmath>
#include <vector>

#include "c2f/branch_trace.hpp"
#include "c2f/errors.hpp"
#include "c2f/ops.hpp"

namespace c2f::ops {
namespace {

std::size_t pooled_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                          std::size_t padding) {
  if (kernel == 0 || stride == 0) {
    throw InvalidSpecError("pool kernel and stride must be positive");
  }
  if (kernel > in + 2 * padding) {
    throw InvalidSpecError("pool kernel " + std::to_string(kernel) +
                           " exceeds padded input " +
                           std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

}  // namespace

Tensor avg_pool2d(Graph* g, const Tensor& x, std::size_t kernel,
                  std::size_t stride, std::size_t padding) {
  const Shape s = x.shape();
  const std::size_t oh = pooled_extent(s.h, kernel, stride, padding);
  const std::size_t ow = pooled_extent(s.w, kernel, stride, padding);
  const double inv_area = 1.0 / static_cast<double>(kernel * kernel);
  Tensor out(Shape{s.n, s.c, oh, ow});
  auto xd = x.data();
  auto od = out.mutable_data();
  const long pad = static_cast<long>(padding);

  auto window = [=](std::size_t o, std::size_t extent) {
    const long lo = static_cast<long>(o * stride) - pad;
    const long hi = lo + static_cast<long>(kernel);
    return std::pair<long, long>{std::max(lo, 0L),
                                 std::min(hi, static_cast<long>(extent))};
  };

  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const double* src = xd.data() + p * s.plane();
    double* dst = od.data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      const auto [h0, h1] = window(i, s.h);
      for (std::size_t j = 0; j < ow; ++j) {
        const auto [w0, w1] = window(j, s.w);
        double acc = 0.0;
        for (long y = h0; y < h1; ++y)
          for (long xx = w0; xx < w1; ++xx) acc += src[y * s.w + xx];
        dst[i * ow + j] = acc * inv_area;
      }
    }
  }

  if (should_record(g, {&x})) {
    g->record(out, [x, out, window, inv_area]() mutable {
      const Shape s = x.shape();
      const Shape os = out.shape();
      auto go = out.grad();
      auto gx = x.grad_buffer();
      for (std::size_t p = 0; p < s.n * s.c; ++p) {
        double* dst = gx.data() + p * s.plane();
        const double* src = go.data() + p * os.plane();
        for (std::size_t i = 0; i < os.h; ++i) {
          const auto [h0, h1] = window(i, s.h);
          for (std::size_t j = 0; j < os.w; ++j) {
            const auto [w0, w1] = window(j, s.w);
            const double v = src[i * os.w + j] * inv_area;
            for (long y = h0; y < h1; ++y)
              for (long xx = w0; xx < w1; ++xx) dst[y * s.w + xx] += v;
          }
        }
      }
    });
  }
  return out;
}

Tensor max_pool2d(Graph* g, const Tensor& x, std::size_t kernel,
                  std::size_t stride) {
  const Shape s = x.shape();
  const std::size_t oh = pooled_extent(s.h, kernel, stride, 0);
  const std::size_t ow = pooled_extent(s.w, kernel, stride, 0);
  Tensor out(Shape{s.n, s.c, oh, ow});
  std::vector<std::size_t> argmax(out.numel());
  auto xd = x.data();
  auto od = out.mutable_data();
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const std::size_t base = p * s.plane();
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = base + (i * stride) * s.w + j * stride;
        for (std::size_t y = i * stride; y < i * stride + kernel; ++y) {
          for (std::size_t xx = j * stride; xx < j * stride + kernel; ++xx) {
            const std::size_t idx = base + y * s.w + xx;
            if (xd[idx] > xd[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + i) * ow + j;
        od[o] = xd[best];
        argmax[o] = best;
      }
    }
  }
  if (BranchTrace* trace = BranchTrace::current()) {
    for (std::size_t a : argmax) trace->fold(a);
  }
  if (should_record(g, {&x})) {
    g->record(out, [x, out, argmax = std::move(argmax)]() mutable {
      auto go = out.grad();
      auto gx = x.grad_buffer();
      for (std::size_t o = 0; o < go.size(); ++o) gx[argmax[o]] += go[o];
    });
  }
  return out;
}

Tensor global_avg_pool(Graph* g, const Tensor& x) {
  const Shape s = x.shape();
  Tensor out(Shape{s.n, s.c, 1, 1});
  auto xd = x.data();
  auto od = out.mutable_data();
  const double inv = 1.0 / static_cast<double>(s.plane());
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.plane(); ++i) acc += xd[p * s.plane() + i];
    od[p] = acc * inv;
  }
  if (should_record(g, {&x})) {
    g->record(out, [x, out, inv]() mutable {
      const Shape s = x.shape();
      auto go = out.grad();
      auto gx = x.grad_buffer();
      for (std::size_t p = 0; p < s.n * s.c; ++p) {
        const double v = go[p] * inv;
        for (std::size_t i = 0; i < s.plane(); ++i) gx[p * s.plane() + i] += v;
      }
    });
  }
  return out;
}

Tensor pool(Graph* g, const Tensor& x, PoolKind kind, std::size_t kernel,
            std::size_t stride) {
  switch (kind) {
    case PoolKind::average:
      return avg_pool2d(g, x, kernel, stride);
    case PoolKind::max:
      return max_pool2d(g, x, kernel, stride);
    case PoolKind::global_average:
      return global_avg_pool(g, x);
  }
  throw InvalidSpecError("unknown pool kind");
}

}  // namespace c2f::ops
