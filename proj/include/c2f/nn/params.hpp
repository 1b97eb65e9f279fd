#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f::nn {

/// Named, ordered collection of the tensors a network owns.
///
/// Trainable entries are optimised; the rest (batch-norm running statistics)
/// are state that is only checkpointed. Blocks keep handles to the same
/// buffers, so updating an entry in place updates the block.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool trainable = true;
  };

  Tensor add(std::string name, Tensor value, bool trainable = true);
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t trainable_numel() const;
  void zero_grad() const;

 private:
  std::vector<Entry> entries_;
};

// Deterministic initialiser; every draw comes from one mt19937_64 stream.
class ParamInit {
 public:
  explicit ParamInit(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi);
  // He-style uniform bound sqrt(6 / fan_in).
  Tensor fan_in_uniform(Shape shape, std::size_t fan_in);

 private:
  std::mt19937_64 rng_;
};

}  // namespace c2f::nn
