#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace c2f {

/// Rank-4 extent in (batch, channel, height, width) order.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense double-precision NCHW tensor.
///
/// A Tensor is a cheap handle: copies alias the same buffer, which is how the
/// autograd graph and parameter sets refer to one value from several places.
/// Use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }

  std::span<const double> data() const;
  std::span<double> mutable_data();

  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value) const;

  bool has_grad() const;
  std::span<const double> grad() const;
  // Gradient state belongs to the shared buffer, so these work through const
  // handles. grad_buffer() allocates a zero buffer on first use.
  std::span<double> grad_buffer() const;
  void zero_grad() const;
  void clear_grad() const;

  Tensor clone() const;
  bool same_as(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> storage_;

  Storage& checked() const;
};

inline std::size_t offset(const Shape& s, std::size_t n, std::size_t c,
                          std::size_t h, std::size_t w) {
  return ((n * s.c + c) * s.h + h) * s.w + w;
}

}  // namespace c2f
