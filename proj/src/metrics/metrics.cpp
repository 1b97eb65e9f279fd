#include "c2f/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "c2f/errors.hpp"

namespace c2f::metrics {
namespace {

void require_valid(const MaskPair& p) {
  if (p.height == 0 || p.width == 0 || p.prediction.size() != p.size() ||
      p.truth.size() != p.size()) {
    throw DimensionError("mask pair is not " + std::to_string(p.height) + "x" +
                         std::to_string(p.width));
  }
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

// 2m / (m^2 + 1 + sd), sd with Bessel's correction (0 below two samples).
double object_similarity(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  const double m = mean_of(x);
  double sd = 0.0;
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
  }
  return 2.0 * m / (m * m + 1.0 + sd);
}

double object_score(const MaskPair& p) {
  std::vector<double> fg, bg;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.truth[i] == 1.0) {
      fg.push_back(p.prediction[i]);
    } else {
      bg.push_back(1.0 - p.prediction[i]);
    }
  }
  // u * O_fg + (1 - u) * O_bg with u = |fg| / n, weighted by counts so that
  // equal scores combine exactly.
  const double nf = static_cast<double>(fg.size()), nb = static_cast<double>(bg.size());
  return (nf * object_similarity(fg) + nb * object_similarity(bg)) / (nf + nb);
}

// Block SSIM; variances divide by max(n - 1, 1).
double block_ssim(const MaskPair& p, std::size_t r0, std::size_t r1, std::size_t c0,
                  std::size_t c1) {
  const std::size_t n = (r1 - r0) * (c1 - c0);
  double x = 0.0, y = 0.0;
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = c0; j < c1; ++j) {
      x += p.prediction[i * p.width + j];
      y += p.truth[i * p.width + j];
    }
  x /= static_cast<double>(n);
  y /= static_cast<double>(n);
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = c0; j < c1; ++j) {
      const double dp = p.prediction[i * p.width + j] - x;
      const double dg = p.truth[i * p.width + j] - y;
      sx += dp * dp;
      sy += dg * dg;
      sxy += dp * dg;
    }
  const double div = static_cast<double>(std::max<std::size_t>(n, 2) - 1);
  sx /= div;
  sy /= div;
  sxy /= div;
  const double alpha = 4.0 * x * y * sxy;
  const double beta = (x * x + y * y) * (sx + sy);
  if (alpha != 0.0) return guarded_ratio(alpha, beta);
  return beta == 0.0 ? 1.0 : 0.0;
}

double region_score(const MaskPair& p) {
  const std::size_t h = p.height, w = p.width;
  double sr = 0.0, sc = 0.0, count = 0.0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      if (p.truth[i * w + j] == 1.0) {
        sr += static_cast<double>(i);
        sc += static_cast<double>(j);
        count += 1.0;
      }
  // Split after the rounded (half-to-even) foreground centroid.
  const auto cy = static_cast<std::size_t>(std::nearbyint(sr / count)) + 1;
  const auto cx = static_cast<std::size_t>(std::nearbyint(sc / count)) + 1;
  const std::array<std::array<std::size_t, 4>, 4> blocks{{{0, cy, 0, cx},
                                                          {0, cy, cx, w},
                                                          {cy, h, 0, cx},
                                                          {cy, h, cx, w}}};
  // Area-weighted: block pixel count / total.
  double score = 0.0;
  for (const auto& k : blocks) {
    const std::size_t pixels = (k[1] - k[0]) * (k[3] - k[2]);
    if (pixels == 0) continue;
    score += static_cast<double>(pixels) * block_ssim(p, k[0], k[1], k[2], k[3]);
  }
  return score / static_cast<double>(h * w);
}

std::vector<double> gaussian_7x7() {
  std::vector<double> k(49);
  double total = 0.0;
  for (int y = -3; y <= 3; ++y)
    for (int x = -3; x <= 3; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * 25.0));
      k[static_cast<std::size_t>((y + 3) * 7 + x + 3)] = v;
      total += v;
    }
  for (double& v : k) v /= total;
  return k;
}

struct Nearest {
  std::vector<double> distance;
  std::vector<std::size_t> index;
};

// Exact Euclidean nearest foreground pixel. Ties go to the smallest
// (row, column).
Nearest nearest_foreground(const MaskPair& p) {
  const std::size_t h = p.height, w = p.width;
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  // Per row: nearest foreground column to each column, left side on ties.
  std::vector<std::size_t> col(h * w, none);
  for (std::size_t r = 0; r < h; ++r) {
    std::size_t last = none;
    for (std::size_t j = 0; j < w; ++j) {
      if (p.truth[r * w + j] == 1.0) last = j;
      col[r * w + j] = last;
    }
    last = none;
    for (std::size_t j = w; j-- > 0;) {
      if (p.truth[r * w + j] == 1.0) last = j;
      std::size_t& c = col[r * w + j];
      if (last != none && (c == none || last - j < j - c)) c = last;
    }
  }
  Nearest out{std::vector<double>(h * w, 0.0), std::vector<std::size_t>(h * w, 0)};
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t self = i * w + j;
      if (p.truth[self] == 1.0) {
        out.index[self] = self;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = self;
      for (std::size_t r = 0; r < h; ++r) {
        const std::size_t c = col[r * w + j];
        if (c == none) continue;
        const double dr = static_cast<double>(i) - static_cast<double>(r);
        const double dc = static_cast<double>(j) - static_cast<double>(c);
        const double d2 = dr * dr + dc * dc;
        if (d2 < best) {
          best = d2;
          arg = r * w + c;
        }
      }
      out.distance[self] = std::sqrt(best);
      out.index[self] = arg;
    }
  return out;
}

}  // namespace

MaskPair MaskPair::make(std::size_t height, std::size_t width, std::vector<double> prediction,
                        std::vector<double> truth) {
  MaskPair p{height, width, std::move(prediction), std::move(truth)};
  require_valid(p);
  for (double& v : p.prediction) {
    if (std::isnan(v)) throw ContractError("prediction contains NaN");
    v = std::clamp(v, 0.0, 1.0);
  }
  for (double v : p.truth) {
    if (v != 0.0 && v != 1.0) throw ContractError("ground truth must be binary");
  }
  return p;
}

MaskPair MaskPair::from_u8(std::size_t height, std::size_t width,
                           std::span<const std::uint8_t> prediction,
                           std::span<const std::uint8_t> truth) {
  if (prediction.size() != height * width || truth.size() != height * width) {
    throw DimensionError("8-bit maps do not match " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  std::vector<double> p(prediction.size()), g(truth.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = prediction[i] / 255.0;
    g[i] = truth[i] >= 128 ? 1.0 : 0.0;
  }
  return make(height, width, std::move(p), std::move(g));
}

double mae(const MaskPair& pair) {
  require_valid(pair);
  double acc = 0.0;
  for (std::size_t i = 0; i < pair.size(); ++i) {
    acc += std::abs(pair.prediction[i] - pair.truth[i]);
  }
  return acc / static_cast<double>(pair.size());
}

double s_measure(const MaskPair& pair) {
  require_valid(pair);
  const double y = mean_of(pair.truth);
  if (y == 0.0) return 1.0 - mean_of(pair.prediction);
  if (y == 1.0) return mean_of(pair.prediction);
  const double s = 0.5 * object_score(pair) + 0.5 * region_score(pair);
  return std::max(s, 0.0);
}

std::vector<std::uint8_t> adaptive_binary(const MaskPair& pair) {
  require_valid(pair);
  const double t = std::min(2.0 * mean_of(pair.prediction), 1.0);
  std::vector<std::uint8_t> b(pair.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double v = pair.prediction[i];
    b[i] = v >= t && v > 0.0 ? 1 : 0;
  }
  return b;
}

double f_measure_adaptive(const MaskPair& pair) {
  const auto b = adaptive_binary(pair);
  double tp = 0.0, selected = 0.0, positives = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    selected += b[i];
    positives += pair.truth[i];
    tp += b[i] * pair.truth[i];
  }
  if (tp == 0.0) return 0.0;
  constexpr double beta2 = 0.3;
  const double precision = guarded_ratio(tp, selected);
  const double recall = guarded_ratio(tp, positives);
  return guarded_ratio((1.0 + beta2) * precision * recall, beta2 * precision + recall);
}

WeightedF weighted_f_measure(const MaskPair& pair) {
  require_valid(pair);
  const std::size_t h = pair.height, w = pair.width, n = pair.size();
  double positives = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    positives += pair.truth[i];
    peak = std::max(peak, pair.prediction[i]);
  }
  if (positives == 0.0) return {0.0, true};
  // Nothing predicted: zero padding in the smoothing step would otherwise
  // credit recall near the border.
  if (peak == 0.0) return {0.0, false};

  const Nearest nearest = nearest_foreground(pair);
  std::vector<double> err(n), dep(n);
  for (std::size_t i = 0; i < n; ++i) err[i] = std::abs(pair.prediction[i] - pair.truth[i]);
  for (std::size_t i = 0; i < n; ++i) dep[i] = err[nearest.index[i]];

  static const std::vector<double> kernel = gaussian_7x7();
  std::vector<double> smooth(n, 0.0);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int dy = -3; dy <= 3; ++dy)
        for (int dx = -3; dx <= 3; ++dx) {
          const long y = static_cast<long>(i) + dy, x = static_cast<long>(j) + dx;
          if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) continue;
          acc += kernel[static_cast<std::size_t>((dy + 3) * 7 + dx + 3)] *
                 dep[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
        }
      smooth[i * w + j] = acc;
    }

  const double decay = std::log(0.5) / 5.0;
  double fg_err = 0.0, bg_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (pair.truth[i] == 1.0) {
      fg_err += std::min(smooth[i], err[i]);
    } else {
      bg_err += err[i] * (2.0 - std::exp(decay * nearest.distance[i]));
    }
  }
  const double tpw = positives - fg_err;
  const double recall = 1.0 - fg_err / positives;
  const double precision = guarded_ratio(tpw, tpw + bg_err);
  return {guarded_ratio(2.0 * recall * precision, recall + precision), false};
}

double e_measure_adaptive(const MaskPair& pair) {
  const auto b = adaptive_binary(pair);
  const std::size_t n = b.size();
  const double gm = mean_of(pair.truth);
  double bm = 0.0;
  for (auto v : b) bm += v;
  bm /= static_cast<double>(n);
  if (gm == 0.0) return 1.0 - bm;
  if (gm == 1.0) return bm;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fb = b[i] - bm;
    const double fg = pair.truth[i] - gm;
    const double xi = guarded_ratio(2.0 * fb * fg, fb * fb + fg * fg);
    acc += (1.0 + xi) * (1.0 + xi) / 4.0;
  }
  return acc / static_cast<double>(n);
}

SampleScores score(const std::string& name, const MaskPair& pair) {
  SampleScores s;
  s.name = name;
  s.mae = mae(pair);
  s.s = s_measure(pair);
  s.f = f_measure_adaptive(pair);
  const WeightedF fw = weighted_f_measure(pair);
  s.fw = fw.value;
  s.fw_degenerate = fw.degenerate;
  s.e = e_measure_adaptive(pair);
  return s;
}

MetricReport aggregate(std::vector<SampleScores> samples) {
  if (samples.empty()) throw DataError("cannot evaluate an empty dataset");
  MetricReport report;
  report.samples = std::move(samples);
  auto column_mean = [&](double SampleScores::*field) {
    std::vector<double> v;
    v.reserve(report.samples.size());
    for (const auto& s : report.samples) v.push_back(s.*field);
    std::sort(v.begin(), v.end());
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
  };
  report.mean.name = "MEAN";
  report.mean.mae = column_mean(&SampleScores::mae);
  report.mean.s = column_mean(&SampleScores::s);
  report.mean.f = column_mean(&SampleScores::f);
  report.mean.fw = column_mean(&SampleScores::fw);
  report.mean.e = column_mean(&SampleScores::e);
  return report;
}

MetricReport evaluate_dataset(const std::vector<std::string>& names,
                              const std::vector<MaskPair>& pairs) {
  if (names.size() != pairs.size()) {
    throw ContractError("evaluate_dataset: names and pairs differ in length");
  }
  std::vector<SampleScores> samples;
  samples.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) samples.push_back(score(names[i], pairs[i]));
  return aggregate(std::move(samples));
}

std::string MetricReport::to_tsv() const {
  std::string out = "name\tM\tS\tF\tFw\tE\n";
  char buf[160];
  auto row = [&](const SampleScores& s) {
    std::snprintf(buf, sizeof buf, "\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n", s.mae, s.s, s.f, s.fw,
                  s.e);
    out += s.name;
    out += buf;
  };
  for (const auto& s : samples) row(s);
  row(mean);
  return out;
}

}  // namespace c2f::metrics
