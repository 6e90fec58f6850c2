#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace v2s {

// Dense row-major tensor of doubles, rank 0..3. Rank 0 is a scalar with one
// element. All model math runs in 64-bit floats.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> dims);
  static Tensor full(std::vector<std::size_t> dims, double v);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;
  double& at(std::size_t i, std::size_t j, std::size_t k);
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  double item() const;  // rank-0/size-1 access

  bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }
  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

}  // namespace v2s
