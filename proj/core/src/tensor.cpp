#include "v2s/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "v2s/errors.hpp"

namespace v2s {

namespace {
std::size_t product(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims)
    : dims_(std::move(dims)), data_(product(dims_), 0.0) {
  if (dims_.size() > 3) throw ShapeError("tensor rank > 3 unsupported");
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (dims_.size() > 3) throw ShapeError("tensor rank > 3 unsupported");
  if (data_.size() != product(dims_))
    throw ShapeError("tensor data size does not match dims");
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_ = {v};
  return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> dims) {
  return Tensor(std::move(dims));
}

Tensor Tensor::full(std::vector<std::size_t> dims, double v) {
  Tensor t(std::move(dims));
  for (auto& x : t.data_) x = v;
  return t;
}

std::size_t Tensor::dim(std::size_t i) const {
  if (i >= dims_.size()) throw ShapeError("tensor dim index out of range");
  return dims_[i];
}

double& Tensor::at(std::size_t i, std::size_t j) {
  return data_[i * dims_[1] + j];
}
double Tensor::at(std::size_t i, std::size_t j) const {
  return data_[i * dims_[1] + j];
}
double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
  return data_[(i * dims_[1] + j) * dims_[2] + k];
}
double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * dims_[1] + j) * dims_[2] + k];
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor");
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

}  // namespace v2s
