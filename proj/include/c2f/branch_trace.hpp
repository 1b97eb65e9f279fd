#pragma once

#include <cstdint>

namespace c2f {

/// Fingerprint of the branch decisions (ReLU signs, max-pool winners) taken by
/// piecewise-linear ops on this thread while the trace is alive. Two
/// evaluations with different fingerprints lie on different linear pieces.
class BranchTrace {
 public:
  BranchTrace();
  ~BranchTrace();
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;

  std::uint64_t fingerprint() const { return hash_; }

  // Innermost live trace on this thread, or nullptr.
  static BranchTrace* current();
  void fold(std::uint64_t word);

 private:
  BranchTrace* previous_;
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

}  // namespace c2f
