#include <Eigen/Core>
#include <algorithm>
#include <vector>

#include "c2f/errors.hpp"
#include "c2f/ops.hpp"
#include "c2f/parallel.hpp"

namespace c2f::ops {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Geometry of one image <-> column-matrix unfolding. The image side is the
// larger "correlation input"; the column side has one column per output tap.
struct Unfold {
  std::size_t channels, height, width;
  std::size_t kh, kw, stride, pad, dilation;
  std::size_t out_h, out_w;

  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return out_h * out_w; }
};

void im2col(const double* image, const Unfold& u, double* col) {
  const std::size_t cols = u.cols();
  for (std::size_t c = 0; c < u.channels; ++c) {
    for (std::size_t ki = 0; ki < u.kh; ++ki) {
      for (std::size_t kj = 0; kj < u.kw; ++kj) {
        double* row = col + ((c * u.kh + ki) * u.kw + kj) * cols;
        for (std::size_t oh = 0; oh < u.out_h; ++oh) {
          const long ih = static_cast<long>(oh * u.stride + ki * u.dilation) -
                          static_cast<long>(u.pad);
          double* dst = row + oh * u.out_w;
          if (ih < 0 || ih >= static_cast<long>(u.height)) {
            std::fill(dst, dst + u.out_w, 0.0);
            continue;
          }
          const double* src = image + (c * u.height + ih) * u.width;
          for (std::size_t ow = 0; ow < u.out_w; ++ow) {
            const long iw = static_cast<long>(ow * u.stride + kj * u.dilation) -
                            static_cast<long>(u.pad);
            dst[ow] = (iw < 0 || iw >= static_cast<long>(u.width)) ? 0.0 : src[iw];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds columns back into the image.
void col2im(const double* col, const Unfold& u, double* image) {
  const std::size_t cols = u.cols();
  for (std::size_t c = 0; c < u.channels; ++c) {
    for (std::size_t ki = 0; ki < u.kh; ++ki) {
      for (std::size_t kj = 0; kj < u.kw; ++kj) {
        const double* row = col + ((c * u.kh + ki) * u.kw + kj) * cols;
        for (std::size_t oh = 0; oh < u.out_h; ++oh) {
          const long ih = static_cast<long>(oh * u.stride + ki * u.dilation) -
                          static_cast<long>(u.pad);
          if (ih < 0 || ih >= static_cast<long>(u.height)) continue;
          double* dst = image + (c * u.height + ih) * u.width;
          const double* src = row + oh * u.out_w;
          for (std::size_t ow = 0; ow < u.out_w; ++ow) {
            const long iw = static_cast<long>(ow * u.stride + kj * u.dilation) -
                            static_cast<long>(u.pad);
            if (iw >= 0 && iw < static_cast<long>(u.width)) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

bool is_pointwise(const Unfold& u) {
  return u.kh == 1 && u.kw == 1 && u.stride == 1 && u.pad == 0 &&
         u.out_h == u.height && u.out_w == u.width;
}

void check_operands(const Tensor& x, const Tensor& weight, const Tensor& bias,
                    const ConvSpec& spec, bool transposed) {
  if (spec.transposed != transposed) {
    throw InvalidSpecError(transposed
                               ? "conv_transpose2d needs a transposed spec"
                               : "conv2d needs a non-transposed spec");
  }
  if (x.shape().c != spec.in_channels) {
    throw DimensionError("conv input has " + std::to_string(x.shape().c) +
                         " channels, spec expects " +
                         std::to_string(spec.in_channels));
  }
  if (weight.shape() != spec.weight_shape()) {
    throw DimensionError("conv weight is " + weight.shape().str() +
                         ", spec expects " + spec.weight_shape().str());
  }
  if (bias.defined() && bias.numel() != spec.out_channels) {
    throw DimensionError("conv bias has " + std::to_string(bias.numel()) +
                         " entries, expected " +
                         std::to_string(spec.out_channels));
  }
}

// Sums per-sample weight-gradient partials in sample order.
void reduce_partials(const std::vector<std::vector<double>>& partials,
                     std::span<double> target) {
  for (const auto& p : partials) {
    for (std::size_t i = 0; i < target.size(); ++i) target[i] += p[i];
  }
}

void accumulate_bias_grad(const Tensor& grad_out, Tensor bias) {
  const Shape& s = grad_out.shape();
  auto gb = bias.grad_buffer();
  auto go = grad_out.grad();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* p = go.data() + (n * s.c + c) * s.plane();
      double acc = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
      gb[c] += acc;
    }
  }
}

void add_bias(Tensor& out, const Tensor& bias) {
  if (!bias.defined()) return;
  const Shape& s = out.shape();
  auto o = out.mutable_data();
  auto b = bias.data();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      double* p = o.data() + (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) p[i] += b[c];
    }
  }
}

}  // namespace

ConvSpec ConvSpec::square(std::size_t in, std::size_t out, std::size_t kernel,
                          std::size_t stride, std::size_t padding,
                          std::size_t dilation) {
  ConvSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel_h = s.kernel_w = kernel;
  s.stride = stride;
  s.padding = padding;
  s.dilation = dilation;
  return s;
}

ConvSpec ConvSpec::same(std::size_t in, std::size_t out, std::size_t kernel,
                        std::size_t dilation) {
  return square(in, out, kernel, 1, dilation * (kernel - 1) / 2, dilation);
}

std::pair<std::size_t, std::size_t> ConvSpec::output_size(std::size_t h,
                                                          std::size_t w) const {
  if (in_channels == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0 ||
      stride == 0 || dilation == 0) {
    throw InvalidSpecError("conv spec fields must be positive");
  }
  auto one = [&](std::size_t in, std::size_t k) -> long {
    const long span = static_cast<long>(dilation * (k - 1));
    const long pad = static_cast<long>(padding);
    const long s = static_cast<long>(stride);
    if (transposed) {
      return (static_cast<long>(in) - 1) * s - 2 * pad + span + 1;
    }
    const long numer = static_cast<long>(in) + 2 * pad - span - 1;
    if (numer < 0) return 0;
    return numer / s + 1;
  };
  if (h == 0 || w == 0) throw InvalidSpecError("conv input has empty spatial dims");
  const long oh = one(h, kernel_h);
  const long ow = one(w, kernel_w);
  if (oh <= 0 || ow <= 0) {
    throw InvalidSpecError("conv produces empty output for input " +
                           std::to_string(h) + "x" + std::to_string(w));
  }
  return {static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)};
}

Shape ConvSpec::weight_shape() const {
  if (transposed) return Shape{in_channels, out_channels, kernel_h, kernel_w};
  return Shape{out_channels, in_channels, kernel_h, kernel_w};
}

Tensor conv2d(Graph* g, const Tensor& x, const Tensor& weight,
              const Tensor& bias, const ConvSpec& spec) {
  check_operands(x, weight, bias, spec, false);
  const Shape xs = x.shape();
  const auto [oh, ow] = spec.output_size(xs.h, xs.w);
  const Unfold u{xs.c, xs.h, xs.w, spec.kernel_h, spec.kernel_w,
                 spec.stride, spec.padding, spec.dilation, oh, ow};
  Tensor out(Shape{xs.n, spec.out_channels, oh, ow});

  const ConstMatMap wm(weight.data().data(), spec.out_channels, u.rows());
  auto xd = x.data();
  auto od = out.mutable_data();
  const bool pointwise = is_pointwise(u);
  parallel_for(xs.n, [&](std::size_t n) {
    const double* img = xd.data() + n * xs.c * xs.plane();
    MatMap y(od.data() + n * spec.out_channels * u.cols(), spec.out_channels,
             u.cols());
    if (pointwise) {
      y.noalias() = wm * ConstMatMap(img, u.rows(), u.cols());
    } else {
      std::vector<double> col(u.rows() * u.cols());
      im2col(img, u, col.data());
      y.noalias() = wm * ConstMatMap(col.data(), u.rows(), u.cols());
    }
  });
  add_bias(out, bias);

  if (should_record(g, {&x, &weight, &bias})) {
    g->record(out, [x, weight, bias, out, u, spec, pointwise]() mutable {
      const Shape xs = x.shape();
      auto go = out.grad();
      const ConstMatMap wm(weight.data().data(), spec.out_channels, u.rows());
      const bool need_w = weight.requires_grad();
      const bool need_x = x.requires_grad();
      std::vector<std::vector<double>> partial_w(
          need_w ? xs.n : 0, std::vector<double>());
      std::span<double> gx;
      if (need_x) gx = x.grad_buffer();
      auto xd = x.data();
      parallel_for(xs.n, [&](std::size_t n) {
        const double* img = xd.data() + n * xs.c * xs.plane();
        const ConstMatMap dy(go.data() + n * spec.out_channels * u.cols(),
                             spec.out_channels, u.cols());
        std::vector<double> col;
        const double* colp = img;
        if (!pointwise) {
          col.resize(u.rows() * u.cols());
          if (need_w) im2col(img, u, col.data());
          colp = col.data();
        }
        if (need_w) {
          partial_w[n].resize(spec.out_channels * u.rows());
          MatMap dw(partial_w[n].data(), spec.out_channels, u.rows());
          dw.noalias() = dy * ConstMatMap(colp, u.rows(), u.cols()).transpose();
        }
        if (need_x) {
          double* gimg = gx.data() + n * xs.c * xs.plane();
          if (pointwise) {
            MatMap(gimg, u.rows(), u.cols()).noalias() += wm.transpose() * dy;
          } else {
            MatMap dcol(col.data(), u.rows(), u.cols());
            dcol.noalias() = wm.transpose() * dy;
            col2im(col.data(), u, gimg);
          }
        }
      });
      if (need_w) reduce_partials(partial_w, weight.grad_buffer());
      if (bias.defined() && bias.requires_grad()) accumulate_bias_grad(out, bias);
    });
  }
  return out;
}

Tensor conv_transpose2d(Graph* g, const Tensor& x, const Tensor& weight,
                        const Tensor& bias, const ConvSpec& spec) {
  check_operands(x, weight, bias, spec, true);
  const Shape xs = x.shape();
  const auto [oh, ow] = spec.output_size(xs.h, xs.w);
  // Unfolding of the *output* image whose columns line up with input pixels.
  const Unfold u{spec.out_channels, oh, ow, spec.kernel_h, spec.kernel_w,
                 spec.stride, spec.padding, spec.dilation, xs.h, xs.w};
  Tensor out(Shape{xs.n, spec.out_channels, oh, ow});

  const ConstMatMap wm(weight.data().data(), spec.in_channels, u.rows());
  auto xd = x.data();
  auto od = out.mutable_data();
  parallel_for(xs.n, [&](std::size_t n) {
    const ConstMatMap xin(xd.data() + n * xs.c * xs.plane(), xs.c, u.cols());
    std::vector<double> col(u.rows() * u.cols());
    MatMap(col.data(), u.rows(), u.cols()).noalias() = wm.transpose() * xin;
    col2im(col.data(), u, od.data() + n * spec.out_channels * oh * ow);
  });
  add_bias(out, bias);

  if (should_record(g, {&x, &weight, &bias})) {
    g->record(out, [x, weight, bias, out, u, spec]() mutable {
      const Shape xs = x.shape();
      const Shape os = out.shape();
      auto go = out.grad();
      const ConstMatMap wm(weight.data().data(), spec.in_channels, u.rows());
      const bool need_w = weight.requires_grad();
      const bool need_x = x.requires_grad();
      std::vector<std::vector<double>> partial_w(need_w ? xs.n : 0);
      std::span<double> gx;
      if (need_x) gx = x.grad_buffer();
      auto xd = x.data();
      parallel_for(xs.n, [&](std::size_t n) {
        std::vector<double> dcol(u.rows() * u.cols());
        im2col(go.data() + n * os.c * os.plane(), u, dcol.data());
        const ConstMatMap dc(dcol.data(), u.rows(), u.cols());
        if (need_x) {
          MatMap(gx.data() + n * xs.c * xs.plane(), xs.c, u.cols()).noalias() +=
              wm * dc;
        }
        if (need_w) {
          partial_w[n].resize(spec.in_channels * u.rows());
          MatMap dw(partial_w[n].data(), spec.in_channels, u.rows());
          dw.noalias() =
              ConstMatMap(xd.data() + n * xs.c * xs.plane(), xs.c, u.cols()) *
              dc.transpose();
        }
      });
      if (need_w) reduce_partials(partial_w, weight.grad_buffer());
      if (bias.defined() && bias.requires_grad()) accumulate_bias_grad(out, bias);
    });
  }
  return out;
}

}  // namespace c2f::ops
