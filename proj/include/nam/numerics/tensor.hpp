#pragma once

#include "nam/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace nam::numerics {

// Dense row-major f64 tensor. Rank 0 (scalar) through rank 3 are used in
// practice. Values are checked finite at every op boundary: NaN/Inf is an
// error state, never silent.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> shape, Eigen::ArrayXd data, bool requires_grad = false);

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor constant(std::vector<int> shape, double value);
  static Tensor scalar(double value);
  static Tensor from_matrix(const Matrix& m, bool requires_grad = false);
  static Tensor from_vector(const Vector& v, bool requires_grad = false);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return data_.size(); }
  bool is_scalar() const { return size() == 1; }

  // Rank-2 accessors; rank-1 tensors are viewed as a single row.
  int rows() const;
  int cols() const;
  Eigen::Map<Matrix> mat();
  Eigen::Map<const Matrix> mat() const;

  double value() const;  // scalar tensors only
  double& at(std::int64_t i) { return data_[i]; }
  double at(std::int64_t i) const { return data_[i]; }

  Eigen::ArrayXd& array() { return data_; }
  const Eigen::ArrayXd& array() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool v) { requires_grad_ = v; }

  Matrix to_matrix() const;
  Vector to_vector() const;
  std::string shape_str() const;  // e.g. "[3x4]"

 private:
  std::vector<int> shape_;
  Eigen::ArrayXd data_;
  bool requires_grad_ = false;
};

bool same_shape(const Tensor& a, const Tensor& b);
std::int64_t shape_size(const std::vector<int>& shape);

// Throws ContractError if any entry is NaN or Inf.
void check_finite(const Tensor& t, const char* op);

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b);
[[noreturn]] void shape_error(const char* op, const Tensor& a);

// Tensor block format used inside checkpoints and feature caches:
// magic "NAMT", u32 rank, u32 dims[rank], f64 little-endian row-major payload.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

}  // namespace nam::numerics
