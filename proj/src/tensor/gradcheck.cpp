#include "c2f/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "c2f/branch_trace.hpp"
#include "c2f/errors.hpp"
#include "c2f/ops.hpp"

namespace c2f {
namespace {

double contract(const Tensor& y, const Tensor& weights) {
  if (y.numel() == 1) return y.data()[0];
  double acc = 0.0;
  auto yd = y.data();
  auto wd = weights.data();
  for (std::size_t i = 0; i < yd.size(); ++i) acc += yd[i] * wd[i];
  return acc;
}

// Seeded visiting order: every index once, random order when only a subset
// will be probed. A partial Fisher-Yates is drawn lazily by the caller.
class ProbeOrder {
 public:
  ProbeOrder(std::size_t numel, bool shuffled, std::mt19937_64& rng)
      : order_(numel), shuffled_(shuffled), rng_(rng) {
    std::iota(order_.begin(), order_.end(), 0);
  }
  bool done() const { return next_ == order_.size(); }
  std::size_t take() {
    // std::shuffle's draw pattern is library-defined; this one is not.
    if (shuffled_) {
      const std::size_t j = next_ + rng_() % (order_.size() - next_);
      std::swap(order_[next_], order_[j]);
    }
    return order_[next_++];
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t next_ = 0;
  bool shuffled_;
  std::mt19937_64& rng_;
};

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& in : inputs) worst = std::max(worst, in.max_rel_error);
  return worst;
}

std::size_t GradCheckReport::kinked() const {
  std::size_t total = 0;
  for (const auto& in : inputs) total += in.kinked;
  return total;
}

GradCheckReport grad_check(const CheckedFn& f, std::vector<NamedInput> inputs,
                           const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed ^ 0x9E3779B97F4A7C15ull);
  for (auto& in : inputs) {
    in.tensor.set_requires_grad(true);
    in.tensor.clear_grad();
  }

  const Tensor probe = f(nullptr);
  const Tensor again = f(nullptr);
  if (probe.shape() != again.shape() ||
      !std::equal(probe.data().begin(), probe.data().end(), again.data().begin())) {
    throw DeterminismError("grad_check: function is not deterministic");
  }
  Tensor weights(probe.shape());
  {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : weights.mutable_data()) v = u(rng);
  }

  Graph graph;
  Tensor y = f(&graph);
  Tensor loss = y.numel() == 1 ? y : ops::sum(&graph, ops::mul(&graph, y, weights));
  graph.backward(loss);

  GradCheckReport report;
  for (auto& in : inputs) {
    InputCheck check;
    check.name = in.name;
    const std::vector<double> analytic =
        in.tensor.has_grad()
            ? std::vector<double>(in.tensor.grad().begin(), in.tensor.grad().end())
            : std::vector<double>(in.tensor.numel(), 0.0);
    auto data = in.tensor.mutable_data();
    const std::size_t wanted =
        options.max_probes == 0 ? in.tensor.numel() : std::min(options.max_probes, in.tensor.numel());
    ProbeOrder order(in.tensor.numel(), wanted < in.tensor.numel(), rng);
    auto evaluate = [&](std::size_t idx, double value, std::uint64_t& fingerprint) {
      data[idx] = value;
      BranchTrace trace;
      const double out = contract(f(nullptr), weights);
      fingerprint = trace.fingerprint();
      return out;
    };
    while (check.probes < wanted && !order.done()) {
      const std::size_t idx = order.take();
      const double original = data[idx];
      const double up = original + options.step;
      const double down = original - options.step;
      std::uint64_t trace_up = 0, trace_down = 0;
      const double f_up = evaluate(idx, up, trace_up);
      const double f_down = evaluate(idx, down, trace_down);
      data[idx] = original;
      if (trace_up != trace_down) {
        // The stencil straddles a ReLU/max-pool switch; the central difference
        // is not an estimate of the derivative there.
        ++check.kinked;
        continue;
      }
      const double numeric = (f_up - f_down) / (up - down);
      const double err = relative_error(analytic[idx], numeric);
      if (check.probes == 0 || err > check.max_rel_error) {
        check.max_rel_error = err;
        check.worst_index = idx;
        check.analytic = analytic[idx];
        check.numeric = numeric;
      }
      ++check.probes;
    }
    report.inputs.push_back(check);
  }
  return report;
}

}  // namespace c2f
