#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace c2f::metrics {

/// Prediction in [0,1] and binary ground truth, row-major, equal size.
struct MaskPair {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> prediction;
  std::vector<double> truth;

  // Clamps the prediction to [0,1]; truth must be exactly {0,1}.
  static MaskPair make(std::size_t height, std::size_t width, std::vector<double> prediction,
                       std::vector<double> truth);
  // 8-bit maps: prediction / 255, truth >= 128.
  static MaskPair from_u8(std::size_t height, std::size_t width,
                          std::span<const std::uint8_t> prediction,
                          std::span<const std::uint8_t> truth);

  std::size_t size() const { return height * width; }
};

inline constexpr double kEps = 1e-8;

// num / max(den, eps): exact whenever the denominator is not degenerate.
inline double guarded_ratio(double num, double den) { return num / (den > kEps ? den : kEps); }

double mae(const MaskPair& pair);
// alpha = 0.5. G empty -> 1 - mean(P); G full -> mean(P).
double s_measure(const MaskPair& pair);
// Binarisation shared by the adaptive F and E measures:
// B = P >= min(2 mean(P), 1) and P > 0.
std::vector<std::uint8_t> adaptive_binary(const MaskPair& pair);
double f_measure_adaptive(const MaskPair& pair);  // beta^2 = 0.3

struct WeightedF {
  double value = 0.0;
  bool degenerate = false;  // empty ground truth
};
// beta^2 = 1, 7x7 Gaussian (sigma 5), background decay ln(0.5) / 5.
WeightedF weighted_f_measure(const MaskPair& pair);
double e_measure_adaptive(const MaskPair& pair);

struct SampleScores {
  std::string name;
  double mae = 0.0;
  double s = 0.0;
  double f = 0.0;
  double fw = 0.0;
  double e = 0.0;
  bool fw_degenerate = false;
};

SampleScores score(const std::string& name, const MaskPair& pair);

struct MetricReport {
  std::vector<SampleScores> samples;
  SampleScores mean;  // name "MEAN"

  std::size_t count() const { return samples.size(); }
  // Header `name\tM\tS\tF\tFw\tE`, one row per sample, then the MEAN row.
  std::string to_tsv() const;
};

// Each mean is summed over the sorted per-sample values, so reordering the
// input leaves the report means bit-identical. Throws DataError when empty.
MetricReport evaluate_dataset(const std::vector<std::string>& names,
                              const std::vector<MaskPair>& pairs);
MetricReport aggregate(std::vector<SampleScores> samples);

}  // namespace c2f::metrics
