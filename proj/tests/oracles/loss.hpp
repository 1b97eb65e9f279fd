#pragma once

#include <cmath>
#include <random>

#include "c2f/loss.hpp"
#include "c2f/tensor.hpp"

namespace c2f::oracles {


inline Tensor random_mask(Shape s, std::mt19937_64& rng, double p = 0.4) {
  std::bernoulli_distribution b(p);
  Tensor m(s);
  for (double& v : m.mutable_data()) v = b(rng) ? 1.0 : 0.0;
  return m;
}

inline double naive_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Direct transcription: per-image sums over every pixel, then batch mean.
inline double naive_bce(const Tensor& z, const Tensor& g, const Tensor& w) {
  const Shape s = z.shape();
  double total = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.h; ++i)
        for (std::size_t j = 0; j < s.w; ++j) {
          const double p = naive_sigmoid(z.at(n, c, i, j));
          const double t = g.at(n, c, i, j);
          num += w.at(n, c, i, j) * (-t * std::log(p) - (1.0 - t) * std::log(1.0 - p));
          den += w.at(n, c, i, j);
        }
    total += num / den;
  }
  return total / static_cast<double>(s.n);
}

inline double naive_iou(const Tensor& z, const Tensor& g, const Tensor& w) {
  const Shape s = z.shape();
  double total = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    double inter = 0.0, sum = 0.0;
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.h; ++i)
        for (std::size_t j = 0; j < s.w; ++j) {
          const double p = naive_sigmoid(z.at(n, c, i, j));
          const double t = g.at(n, c, i, j);
          inter += w.at(n, c, i, j) * p * t;
          sum += w.at(n, c, i, j) * (p + t);
        }
    total += 1.0 - (inter + 1.0) / (sum - inter + 1.0);
  }
  return total / static_cast<double>(s.n);
}

// Zero-padded window average; the denominator is always k * k.
inline Tensor naive_weights(const Tensor& g, std::size_t k, double lambda) {
  const Shape s = g.shape();
  const long r = static_cast<long>(k / 2);
  Tensor w(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (long i = 0; i < static_cast<long>(s.h); ++i)
        for (long j = 0; j < static_cast<long>(s.w); ++j) {
          double acc = 0.0;
          for (long di = -r; di <= r; ++di)
            for (long dj = -r; dj <= r; ++dj) {
              const long y = i + di, x = j + dj;
              if (y >= 0 && x >= 0 && y < static_cast<long>(s.h) && x < static_cast<long>(s.w))
                acc += g.at(n, c, y, x);
            }
          const double avg = acc / static_cast<double>(k * k);
          w.at(n, c, i, j) = 1.0 + lambda * std::abs(avg - g.at(n, c, i, j));
        }
  return w;
}

inline double bce(const Tensor& z, const Tensor& g, const Tensor& w) {
  return loss::weighted_bce(nullptr, z, g, w).item();
}
inline double iou(const Tensor& z, const Tensor& g, const Tensor& w) {
  return loss::weighted_iou(nullptr, z, g, w).item();
}

}  // namespace c2f::oracles
