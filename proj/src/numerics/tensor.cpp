#include "nam/numerics/tensor.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "tensor serialization assumes a little-endian host");

namespace nam::numerics {

std::int64_t shape_size(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<int> shape, Eigen::ArrayXd data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
  for (int d : shape_) {
    if (d < 0) throw ContractError("tensor dimension must be non-negative, got " + shape_str());
  }
  if (shape_size(shape_) != data_.size()) {
    throw ContractError("tensor data size " + std::to_string(data_.size()) +
                        " does not match shape " + shape_str());
  }
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  const std::int64_t n = shape_size(shape);
  return Tensor(std::move(shape), Eigen::ArrayXd::Zero(n), requires_grad);
}

Tensor Tensor::constant(std::vector<int> shape, double value) {
  const std::int64_t n = shape_size(shape);
  return Tensor(std::move(shape), Eigen::ArrayXd::Constant(n, value), false);
}

Tensor Tensor::scalar(double value) { return constant({}, value); }

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
  Eigen::ArrayXd data(m.size());
  Eigen::Map<Matrix>(data.data(), m.rows(), m.cols()) = m;
  return Tensor({static_cast<int>(m.rows()), static_cast<int>(m.cols())}, std::move(data),
                requires_grad);
}

Tensor Tensor::from_vector(const Vector& v, bool requires_grad) {
  return Tensor({static_cast<int>(v.size())}, v.array(), requires_grad);
}

int Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  if (rank() == 1) return 1;
  throw ContractError("rows() on tensor of shape " + shape_str());
}

int Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  throw ContractError("cols() on tensor of shape " + shape_str());
}

Eigen::Map<Matrix> Tensor::mat() { return {data_.data(), rows(), cols()}; }

Eigen::Map<const Matrix> Tensor::mat() const { return {data_.data(), rows(), cols()}; }

double Tensor::value() const {
  if (!is_scalar()) throw ContractError("value() on non-scalar tensor " + shape_str());
  return data_[0];
}

Matrix Tensor::to_matrix() const { return mat(); }

Vector Tensor::to_vector() const { return data_.matrix(); }

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i > 0) os << "x";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

void check_finite(const Tensor& t, const char* op) {
  if (!t.array().allFinite()) {
    throw ContractError(std::string(op) + ": non-finite value in tensor " + t.shape_str());
  }
}

void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ContractError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                      b.shape_str());
}

void shape_error(const char* op, const Tensor& a) {
  throw ContractError(std::string(op) + ": unsupported shape " + a.shape_str());
}

namespace {

constexpr char kMagic[4] = {'N', 'A', 'M', 'T'};

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("tensor block truncated");
  return v;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(kMagic, 4);
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!out) throw IoError("failed to write tensor block");
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("bad tensor block magic (expected NAMT)");
  }
  const auto rank = read_raw<std::uint32_t>(in);
  if (rank > 8) throw IoError("tensor rank " + std::to_string(rank) + " out of range");
  std::vector<int> shape(rank);
  for (auto& d : shape) d = static_cast<int>(read_raw<std::uint32_t>(in));
  const std::int64_t n = shape_size(shape);
  Eigen::ArrayXd data(n);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("tensor payload truncated");
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace nam::numerics
