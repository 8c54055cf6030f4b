#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace btac {

/// Dense D-way tensor of doubles.
///
/// Linearization is fixed: mode 1 varies fastest, so the linear index of
/// cell (i_1,...,i_D) is i_1 + p_1*(i_2 + p_2*(i_3 + ...)). All file
/// formats and contractions in this project assume this layout.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<int> dims);
  DenseTensor(std::vector<int> dims, std::vector<double> data);

  int order() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  double operator[](std::int64_t i) const { return data_[i]; }
  double& operator[](std::int64_t i) { return data_[i]; }

  std::int64_t linear_index(std::span<const int> idx) const;
  double at(std::span<const int> idx) const { return data_[linear_index(idx)]; }
  double& at(std::span<const int> idx) { return data_[linear_index(idx)]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  void fill(double v);
  DenseTensor& operator+=(const DenseTensor& other);

 private:
  std::vector<int> dims_;
  std::vector<double> data_;
};

std::int64_t cell_count(std::span<const int> dims);

/// Rank-R set of per-mode margin vectors. margin(j, r) has length dims[j].
class ParafacCoeff {
 public:
  ParafacCoeff() = default;
  ParafacCoeff(std::vector<int> dims, int rank);

  int rank() const { return rank_; }
  int order() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }

  std::span<double> margin(int j, int r);
  std::span<const double> margin(int j, int r) const;

  /// Composes the full tensor: cell = sum_r prod_j margin(j,r)[i_j].
  DenseTensor compose() const;
  /// Composes only the rank-r component into `out` (resized to dims).
  void compose_rank(int r, DenseTensor& out) const;

 private:
  std::vector<int> dims_;
  int rank_ = 0;
  std::vector<std::vector<double>> margins_;  // index j*rank_ + r
};

/// Contracts tensor t over all modes except j against the given margin
/// vectors: out[z] = sum over cells with i_j == z of
/// t[cell] * prod_{j' != j} margins[j'][i_{j'}]. margins[j] is ignored.
std::vector<double> outer_contraction(const DenseTensor& t,
                                      const std::vector<std::span<const double>>& margins,
                                      int j);

double frobenius_distance(const DenseTensor& a, const DenseTensor& b);

}  // namespace btac
