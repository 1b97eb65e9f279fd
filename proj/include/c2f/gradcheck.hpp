#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "c2f/graph.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Entries probed per input; 0 probes every entry.
  std::size_t max_probes = 0;
  std::uint64_t seed = 0;
};

struct NamedInput {
  std::string name;
  Tensor tensor;
};

struct InputCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  // Entries skipped because f(x+h) and f(x-h) took different ReLU/max-pool
  // branches; another entry is probed in their place.
  std::size_t kinked = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<InputCheck> inputs;

  double max_rel_error() const;
  std::size_t kinked() const;
  bool passed(double tolerance) const { return max_rel_error() < tolerance; }
};

// The function under test. It reads the checked tensors through handles it
// captured, records into the graph when one is given and returns any tensor;
// a non-scalar result is contracted with fixed random weights.
using CheckedFn = std::function<Tensor(Graph*)>;

/// Compares reverse-mode gradients with central differences.
///
/// Relative error per entry is |a - n| / max(|a|, |n|, 1e-8). Throws
/// DeterminismError if two evaluations at the same point differ. Probes whose
/// stencil crosses a piecewise-linear switch (see BranchTrace) are replaced.
GradCheckReport grad_check(const CheckedFn& f, std::vector<NamedInput> inputs,
                           const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric);

}  // namespace c2f
