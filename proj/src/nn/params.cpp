#include "c2f/nn/params.hpp"

#include <algorithm>
#include <cmath>

#include "c2f/errors.hpp"

namespace c2f::nn {

Tensor ParamSet::add(std::string name, Tensor value, bool trainable) {
  if (contains(name)) throw ContractError("duplicate parameter name: " + name);
  value.set_requires_grad(trainable);
  entries_.push_back(Entry{std::move(name), value, trainable});
  return value;
}

const Tensor& ParamSet::get(std::string_view name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const Entry& e) { return e.name == name; });
  if (it == entries_.end()) {
    throw ContractError("unknown parameter: " + std::string(name));
  }
  return it->tensor;
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.name == name; });
}

std::size_t ParamSet::trainable_numel() const {
  std::size_t total = 0;
  for (const auto& e : entries_) {
    if (e.trainable) total += e.tensor.numel();
  }
  return total;
}

void ParamSet::zero_grad() const {
  for (const auto& e : entries_) e.tensor.clear_grad();
}

double ParamInit::uniform(double lo, double hi) {
  // 53 random mantissa bits; avoids implementation-defined distributions.
  const double unit = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

Tensor ParamInit::fan_in_uniform(Shape shape, std::size_t fan_in) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  Tensor t(shape);
  for (double& v : t.mutable_data()) v = uniform(-bound, bound);
  return t;
}

}  // namespace c2f::nn
