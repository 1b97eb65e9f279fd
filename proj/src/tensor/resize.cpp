#include <algorithm>
#include <cmath>
#include <vector>

#include "c2f/errors.hpp"
#include "c2f/ops.hpp"

namespace c2f::ops {
namespace {

// One output coordinate's two source taps and the weight of the upper tap.
struct Tap {
  std::size_t lo, hi;
  double frac;
};

std::vector<Tap> taps(std::size_t in, std::size_t out) {
  std::vector<Tap> t(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t lo = static_cast<std::size_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    t[o] = Tap{lo, hi, src - static_cast<double>(lo)};
  }
  return t;
}

}  // namespace

Tensor upsample_bilinear(Graph* g, const Tensor& x, std::size_t out_h,
                         std::size_t out_w) {
  const Shape s = x.shape();
  if (out_h == 0 || out_w == 0) {
    throw DimensionError("bilinear resize target must be at least 1x1");
  }
  if (s.h == 0 || s.w == 0) throw DimensionError("bilinear resize of empty input");
  if (out_h == s.h && out_w == s.w) {
    Tensor out = x.clone();
    if (should_record(g, {&x})) {
      g->record(out, [x, out]() mutable {
        auto go = out.grad();
        auto gx = x.grad_buffer();
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
      });
    }
    return out;
  }

  const auto ty = taps(s.h, out_h);
  const auto tx = taps(s.w, out_w);
  Tensor out(Shape{s.n, s.c, out_h, out_w});
  auto xd = x.data();
  auto od = out.mutable_data();
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const double* src = xd.data() + p * s.plane();
    double* dst = od.data() + p * out_h * out_w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const Tap& a = ty[i];
      for (std::size_t j = 0; j < out_w; ++j) {
        const Tap& b = tx[j];
        const double top = (1.0 - b.frac) * src[a.lo * s.w + b.lo] +
                           b.frac * src[a.lo * s.w + b.hi];
        const double bottom = (1.0 - b.frac) * src[a.hi * s.w + b.lo] +
                              b.frac * src[a.hi * s.w + b.hi];
        dst[i * out_w + j] = (1.0 - a.frac) * top + a.frac * bottom;
      }
    }
  }

  if (should_record(g, {&x})) {
    g->record(out, [x, out, ty, tx]() mutable {
      const Shape s = x.shape();
      const Shape os = out.shape();
      auto go = out.grad();
      auto gx = x.grad_buffer();
      for (std::size_t p = 0; p < s.n * s.c; ++p) {
        double* dst = gx.data() + p * s.plane();
        const double* src = go.data() + p * os.plane();
        for (std::size_t i = 0; i < os.h; ++i) {
          const Tap& a = ty[i];
          for (std::size_t j = 0; j < os.w; ++j) {
            const Tap& b = tx[j];
            const double v = src[i * os.w + j];
            dst[a.lo * s.w + b.lo] += (1.0 - a.frac) * (1.0 - b.frac) * v;
            dst[a.lo * s.w + b.hi] += (1.0 - a.frac) * b.frac * v;
            dst[a.hi * s.w + b.lo] += a.frac * (1.0 - b.frac) * v;
            dst[a.hi * s.w + b.hi] += a.frac * b.frac * v;
          }
        }
      }
    });
  }
  return out;
}

Tensor resize_nearest(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  const Shape s = x.shape();
  if (out_h == 0 || out_w == 0) {
    throw DimensionError("nearest resize target must be at least 1x1");
  }
  Tensor out(Shape{s.n, s.c, out_h, out_w});
  auto xd = x.data();
  auto od = out.mutable_data();
  auto src_index = [](std::size_t o, std::size_t in, std::size_t out) {
    const std::size_t i = o * in / out;
    return std::min(i, in - 1);
  };
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    for (std::size_t i = 0; i < out_h; ++i) {
      const std::size_t si = src_index(i, s.h, out_h);
      for (std::size_t j = 0; j < out_w; ++j) {
        od[(p * out_h + i) * out_w + j] =
            xd[p * s.plane() + si * s.w + src_index(j, s.w, out_w)];
      }
    }
  }
  return out;
}

}  // namespace c2f::ops
