#include <cmath>
#include <vector>

#include "c2f/branch_trace.hpp"
#include "c2f/errors.hpp"
#include "c2f/ops.hpp"

namespace c2f::ops {
namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + a.shape().str() +
                         " and " + b.shape().str() + " differ");
  }
}

void add_into(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

double sigmoid_value(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Tensor add(Graph* g, const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = ad[i] + bd[i];
  if (should_record(g, {&a, &b})) {
    g->record(out, [a, b, out]() mutable {
      if (a.requires_grad()) add_into(a.grad_buffer(), out.grad());
      if (b.requires_grad()) add_into(b.grad_buffer(), out.grad());
    });
  }
  return out;
}

Tensor sub(Graph* g, const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = ad[i] - bd[i];
  if (should_record(g, {&a, &b})) {
    g->record(out, [a, b, out]() mutable {
      auto go = out.grad();
      if (a.requires_grad()) add_into(a.grad_buffer(), go);
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go[i];
      }
    });
  }
  return out;
}

Tensor mul(Graph* g, const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = ad[i] * bd[i];
  if (should_record(g, {&a, &b})) {
    g->record(out, [a, b, out]() mutable {
      auto go = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        auto bd = b.data();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * bd[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        auto ad = a.data();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * ad[i];
      }
    });
  }
  return out;
}

Tensor scale(Graph* g, const Tensor& x, double factor) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xd[i] * factor;
  if (should_record(g, {&x})) {
    g->record(out, [x, out, factor]() mutable {
      auto go = out.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * factor;
    });
  }
  return out;
}

Tensor relu(Graph* g, const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  if (BranchTrace* trace = BranchTrace::current()) {
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < o.size(); ++i) {
      word |= static_cast<std::uint64_t>(xd[i] > 0.0) << (i % 64);
      if (i % 64 == 63 || i + 1 == o.size()) {
        trace->fold(word);
        word = 0;
      }
    }
  }
  if (should_record(g, {&x})) {
    g->record(out, [x, out]() mutable {
      auto go = out.grad();
      auto gx = x.grad_buffer();
      auto xd = x.data();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        if (xd[i] > 0.0) gx[i] += go[i];
      }
    });
  }
  return out;
}

Tensor sigmoid(Graph* g, const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = sigmoid_value(xd[i]);
  if (should_record(g, {&x})) {
    g->record(out, [x, out]() mutable {
      auto go = out.grad();
      auto od = out.data();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        gx[i] += go[i] * od[i] * (1.0 - od[i]);
      }
    });
  }
  return out;
}

Tensor one_minus(Graph* g, const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = 1.0 - xd[i];
  if (should_record(g, {&x})) {
    g->record(out, [x, out]() mutable {
      auto go = out.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] -= go[i];
    });
  }
  return out;
}

Tensor concat_channels(Graph* g, std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape first = parts.front().shape();
  std::size_t channels = 0;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw DimensionError("concat: " + s.str() + " incompatible with " +
                           first.str());
    }
    channels += s.c;
  }
  Tensor out(Shape{first.n, channels, first.h, first.w});
  auto o = out.mutable_data();
  const std::size_t plane = first.plane();
  for (std::size_t n = 0; n < first.n; ++n) {
    std::size_t c0 = 0;
    for (const Tensor& t : parts) {
      const std::size_t block = t.shape().c * plane;
      auto src = t.data().subspan(n * block, block);
      std::copy(src.begin(), src.end(), o.begin() + (n * channels + c0) * plane);
      c0 += t.shape().c;
    }
  }
  bool any = false;
  for (const Tensor& t : parts) any = any || t.requires_grad();
  if (g != nullptr && any) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    g->record(out, [inputs, out, channels, plane]() mutable {
      auto go = out.grad();
      const std::size_t batch = out.shape().n;
      std::size_t c0 = 0;
      for (Tensor& t : inputs) {
        const std::size_t block = t.shape().c * plane;
        if (t.requires_grad()) {
          auto gt = t.grad_buffer();
          for (std::size_t n = 0; n < batch; ++n) {
            const double* src = go.data() + (n * channels + c0) * plane;
            for (std::size_t i = 0; i < block; ++i) gt[n * block + i] += src[i];
          }
        }
        c0 += t.shape().c;
      }
    });
  }
  return out;
}

Tensor concat_channels(Graph* g, const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_channels(g, parts);
}

Tensor expand(Graph* g, const Tensor& x, const Shape& target) {
  const Shape s = x.shape();
  auto fits = [](std::size_t from, std::size_t to) {
    return from == to || from == 1;
  };
  if (s.n != target.n || !fits(s.c, target.c) || !fits(s.h, target.h) ||
      !fits(s.w, target.w)) {
    throw DimensionError("expand: cannot broadcast " + s.str() + " to " +
                         target.str());
  }
  Tensor out(target);
  auto o = out.mutable_data();
  auto xd = x.data();
  auto src_index = [s](std::size_t n, std::size_t c, std::size_t h,
                       std::size_t w) {
    return offset(s, n, s.c == 1 ? 0 : c, s.h == 1 ? 0 : h, s.w == 1 ? 0 : w);
  };
  std::size_t i = 0;
  for (std::size_t n = 0; n < target.n; ++n)
    for (std::size_t c = 0; c < target.c; ++c)
      for (std::size_t h = 0; h < target.h; ++h)
        for (std::size_t w = 0; w < target.w; ++w) o[i++] = xd[src_index(n, c, h, w)];
  if (should_record(g, {&x})) {
    g->record(out, [x, out, src_index]() mutable {
      const Shape t = out.shape();
      auto go = out.grad();
      auto gx = x.grad_buffer();
      std::size_t i = 0;
      for (std::size_t n = 0; n < t.n; ++n)
        for (std::size_t c = 0; c < t.c; ++c)
          for (std::size_t h = 0; h < t.h; ++h)
            for (std::size_t w = 0; w < t.w; ++w) gx[src_index(n, c, h, w)] += go[i++];
    });
  }
  return out;
}

Tensor sum(Graph* g, const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (should_record(g, {&x})) {
    g->record(out, [x, out]() mutable {
      const double v = out.grad()[0];
      for (double& gx : x.grad_buffer()) gx += v;
    });
  }
  return out;
}

Tensor mean(Graph* g, const Tensor& x) {
  return scale(g, sum(g, x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace c2f::ops
