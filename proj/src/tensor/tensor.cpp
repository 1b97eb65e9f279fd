#include "c2f/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "c2f/errors.hpp"

namespace c2f {

std::string Shape::str() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : storage_(std::make_shared<Storage>()) {
  storage_->shape = shape;
  storage_->data.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : storage_(std::make_shared<Storage>()) {
  if (values.size() != shape.numel()) {
    throw DimensionError("tensor " + shape.str() + " needs " +
                         std::to_string(shape.numel()) + " values, got " +
                         std::to_string(values.size()));
  }
  storage_->shape = shape;
  storage_->data = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1, 1, 1, 1}, value); }

Tensor::Storage& Tensor::checked() const {
  if (!storage_) throw ContractError("use of an undefined tensor");
  return *storage_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::span<const double> Tensor::data() const { return checked().data; }

std::span<double> Tensor::mutable_data() { return checked().data; }

double Tensor::at(std::size_t n, std::size_t c, std::size_t h,
                  std::size_t w) const {
  const auto& s = checked();
  return s.data[offset(s.shape, n, c, h, w)];
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  auto& s = checked();
  return s.data[offset(s.shape, n, c, h, w)];
}

double Tensor::item() const {
  const auto& s = checked();
  if (s.data.size() != 1) {
    throw ContractError("item() on non-scalar tensor " + s.shape.str());
  }
  return s.data[0];
}

bool Tensor::requires_grad() const { return storage_ && storage_->requires_grad; }

void Tensor::set_requires_grad(bool value) const { checked().requires_grad = value; }

bool Tensor::has_grad() const { return storage_ && !storage_->grad.empty(); }

std::span<const double> Tensor::grad() const { return checked().grad; }

std::span<double> Tensor::grad_buffer() const {
  auto& s = checked();
  if (s.grad.size() != s.data.size()) s.grad.assign(s.data.size(), 0.0);
  return s.grad;
}

void Tensor::zero_grad() const {
  auto& s = checked();
  std::fill(s.grad.begin(), s.grad.end(), 0.0);
}

void Tensor::clear_grad() const {
  auto& s = checked();
  s.grad.clear();
  s.grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
  const auto& s = checked();
  return Tensor(s.shape, s.data);
}

}  // namespace c2f
