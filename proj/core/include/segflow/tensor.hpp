#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace segflow {

// Dense row-major tensor of doubles. Rank is dynamic; everything in this
// project is rank 1..4 (bias vectors, masks, CHW feature maps, OIHW
// convolution kernels). All numerics run in 64-bit; storage formats that
// need 32-bit (.flo) convert at the file boundary.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double value);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int i, int j) { return data_[idx2(i, j)]; }
  double at(int i, int j) const { return data_[idx2(i, j)]; }
  double& at(int c, int i, int j) { return data_[idx3(c, i, j)]; }
  double at(int c, int i, int j) const { return data_[idx3(c, i, j)]; }
  double& at(int o, int c, int i, int j) { return data_[idx4(o, c, i, j)]; }
  double at(int o, int c, int i, int j) const { return data_[idx4(o, c, i, j)]; }

  void fill(double value);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  // FNV-1a over the raw 64-bit patterns; shape included. Used by tests and
  // the determinism checks, not for persistence.
  std::uint64_t content_hash() const;

 private:
  std::size_t idx2(int i, int j) const {
    assert(rank() == 2);
    return static_cast<std::size_t>(i) * shape_[1] + j;
  }
  std::size_t idx3(int c, int i, int j) const {
    assert(rank() == 3);
    return (static_cast<std::size_t>(c) * shape_[1] + i) * shape_[2] + j;
  }
  std::size_t idx4(int o, int c, int i, int j) const {
    assert(rank() == 4);
    return ((static_cast<std::size_t>(o) * shape_[1] + c) * shape_[2] + i) * shape_[3] + j;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

// Elementwise max |a - b|; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace segflow
