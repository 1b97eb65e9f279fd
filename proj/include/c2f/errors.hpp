#pragma once

#include <stdexcept>
#include <string>

namespace c2f {

// Operand shapes disagree with what an operation requires.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A kernel/stride/padding/configuration combination that cannot produce output.
class InvalidSpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller broke a precondition (non-scalar backward seed, bad input range, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Well-formed but unusable input, e.g. image sides not divisible by 32.
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DeterminismError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data (images, masks, manifests) violates its format contract.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Readable file in a variant this codec does not handle (bit depth, interlace).
class UnsupportedFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint bytes do not decode; `offset` is where decoding stopped.
class CorruptCheckpointError : public std::runtime_error {
 public:
  CorruptCheckpointError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// NaN or Inf reached a place that requires finite values (e.g. a gradient).
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace c2f
