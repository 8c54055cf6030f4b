#include "btac/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace btac {

std::int64_t cell_count(std::span<const int> dims) {
  std::int64_t n = 1;
  for (int d : dims) n *= d;
  return n;
}

static void check_dims(std::span<const int> dims) {
  if (dims.empty()) throw std::invalid_argument("tensor needs at least one mode");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("tensor dims must be >= 1");
}

DenseTensor::DenseTensor(std::vector<int> dims) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_.assign(static_cast<std::size_t>(cell_count(dims_)), 0.0);
}

DenseTensor::DenseTensor(std::vector<int> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  check_dims(dims_);
  if (cell_count(dims_) != static_cast<std::int64_t>(data_.size()))
    throw std::invalid_argument("tensor data length does not match dims");
}

std::int64_t DenseTensor::linear_index(std::span<const int> idx) const {
  if (idx.size() != dims_.size())
    throw std::invalid_argument("multi-index order mismatch");
  std::int64_t lin = 0, stride = 1;
  for (std::size_t j = 0; j < dims_.size(); ++j) {
    if (idx[j] < 0 || idx[j] >= dims_[j])
      throw std::out_of_range("multi-index out of range");
    lin += stride * idx[j];
    stride *= dims_[j];
  }
  return lin;
}

void DenseTensor::fill(double v) {
  for (auto& x : data_) x = v;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
  if (dims_ != other.dims_) throw std::invalid_argument("tensor dims mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

ParafacCoeff::ParafacCoeff(std::vector<int> dims, int rank)
    : dims_(std::move(dims)), rank_(rank) {
  check_dims(dims_);
  if (rank_ < 1) throw std::invalid_argument("rank must be >= 1");
  margins_.resize(dims_.size() * static_cast<std::size_t>(rank_));
  for (std::size_t j = 0; j < dims_.size(); ++j)
    for (int r = 0; r < rank_; ++r)
      margins_[j * rank_ + r].assign(dims_[j], 0.0);
}

std::span<double> ParafacCoeff::margin(int j, int r) {
  return margins_[static_cast<std::size_t>(j) * rank_ + r];
}

std::span<const double> ParafacCoeff::margin(int j, int r) const {
  return margins_[static_cast<std::size_t>(j) * rank_ + r];
}

// Builds the rank-1 outer product incrementally: after mode j the buffer
// holds the composed values over modes 1..j in mode-1-fastest order.
void ParafacCoeff::compose_rank(int r, DenseTensor& out) const {
  if (out.dims() != dims_) out = DenseTensor(dims_);
  const int D = order();
  std::span<const double> m0 = margin(0, r);
  std::vector<double>& buf = out.data();
  std::int64_t len = dims_[0];
  for (std::int64_t i = 0; i < len; ++i) buf[i] = m0[i];
  for (int j = 1; j < D; ++j) {
    std::span<const double> mj = margin(j, r);
    // Descending k so the k=0 in-place scale happens last.
    for (int k = dims_[j] - 1; k >= 0; --k) {
      const double w = mj[k];
      double* dst = buf.data() + k * len;
      for (std::int64_t i = 0; i < len; ++i) dst[i] = buf[i] * w;
    }
    len *= dims_[j];
  }
}

DenseTensor ParafacCoeff::compose() const {
  DenseTensor total(dims_);
  DenseTensor part;
  for (int r = 0; r < rank_; ++r) {
    compose_rank(r, part);
    total += part;
  }
  return total;
}

std::vector<double> outer_contraction(const DenseTensor& t,
                                      const std::vector<std::span<const double>>& margins,
                                      int j) {
  const auto& dims = t.dims();
  const int D = t.order();
  if (static_cast<int>(margins.size()) != D)
    throw std::invalid_argument("outer_contraction: need one margin slot per mode");
  if (j < 0 || j >= D) throw std::invalid_argument("outer_contraction: bad mode");
  for (int k = 0; k < D; ++k) {
    if (k == j) continue;
    if (static_cast<int>(margins[k].size()) != dims[k])
      throw std::invalid_argument("outer_contraction: margin length mismatch");
  }

  // Reduce trailing modes D-1..j+1 first (each is the slowest-varying axis
  // of the current buffer), then leading modes 0..j-1 (fastest-varying).
  std::vector<double> buf = t.data();
  std::int64_t len = t.size();
  for (int k = D - 1; k > j; --k) {
    const std::int64_t inner = len / dims[k];
    std::span<const double> m = margins[k];
    for (std::int64_t i = 0; i < inner; ++i) {
      double s = 0.0;
      for (int a = 0; a < dims[k]; ++a) s += buf[i + a * inner] * m[a];
      buf[i] = s;
    }
    len = inner;
    buf.resize(len);
  }
  for (int k = 0; k < j; ++k) {
    const int p = dims[k];
    const std::int64_t outer = len / p;
    std::span<const double> m = margins[k];
    for (std::int64_t q = 0; q < outer; ++q) {
      double s = 0.0;
      const double* row = buf.data() + q * p;
      for (int a = 0; a < p; ++a) s += row[a] * m[a];
      buf[q] = s;
    }
    len = outer;
    buf.resize(len);
  }
  return buf;
}

double frobenius_distance(const DenseTensor& a, const DenseTensor& b) {
  if (a.dims() != b.dims())
    throw std::invalid_argument("frobenius_distance: dims mismatch");
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace btac
