#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "c2f/gradcheck.hpp"

namespace c2f {

/// One named finite-difference check, parameterised by a seed that drives
/// both the random instance and the probe selection.
struct GradCase {
  std::string name;
  std::function<GradCheckReport(std::uint64_t seed)> run;
};

// Every differentiable operator plus the joint loss.
std::vector<GradCase> operator_grad_cases();
// RFB (5- and 4-branch), MSCA, ACFM, DGCM, MRB, CIM, backbone, refinement.
// The input and every trainable tensor are probed at up to `max_probes`
// seeded random entries each.
std::vector<GradCase> block_grad_cases(std::size_t max_probes = 6);
// Desk-scale network + joint loss on a 1x3x32x32 image, differentiated
// w.r.t. the image (the full backward chain) or w.r.t. every trainable
// tensor. Parameter probes are limited by double precision: the central
// difference carries about ulp(loss) / 2h of rounding noise, which exceeds
// 1e-4 relative for entries whose gradient is below roughly 1e-7 * |loss|.
enum class NetworkTarget { image, parameters };
GradCase network_grad_case(NetworkTarget target, std::size_t max_probes);

struct SuiteResult {
  std::string name;
  std::size_t seeds = 0;
  double max_rel_error = 0.0;
  std::uint64_t worst_seed = 0;
  std::string worst_input;
  std::size_t probes = 0;
  std::size_t kinked = 0;
};

SuiteResult run_grad_case(const GradCase& c, std::size_t seeds, std::uint64_t first_seed = 0);

}  // namespace c2f
