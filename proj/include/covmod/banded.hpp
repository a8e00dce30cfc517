#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <vector>

namespace covmod {

// Symmetric matrix with half-bandwidth `bandwidth`, lower band stored row-wise.
// Entries outside the band are structurally zero.
class BandedSymmetricMatrix {
 public:
  BandedSymmetricMatrix() = default;
  BandedSymmetricMatrix(std::size_t n, std::size_t bandwidth);

  std::size_t size() const { return n_; }
  std::size_t bandwidth() const { return bw_; }

  bool in_band(std::size_t i, std::size_t j) const {
    return (i > j ? i - j : j - i) <= bw_;
  }
  // (i, j) must lie in the band.
  double& at(std::size_t i, std::size_t j);
  double operator()(std::size_t i, std::size_t j) const;

  void add_to_diagonal(double v);
  Eigen::MatrixXd to_dense() const;
  const std::vector<double>& band_data() const { return data_; }
  std::vector<double>& band_data() { return data_; }

 private:
  std::size_t index(std::size_t i, std::size_t j) const;

  std::size_t n_ = 0;
  std::size_t bw_ = 0;
  std::vector<double> data_;
};

// Banded Cholesky factor L (A = L L^T), sharing the band shape of A.
class BandedCholesky {
 public:
  // Empty optional when A is not numerically positive definite.
  static std::optional<BandedCholesky> factor(const BandedSymmetricMatrix& a);

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  double log_determinant() const;

 private:
  explicit BandedCholesky(BandedSymmetricMatrix l) : l_(std::move(l)) {}
  BandedSymmetricMatrix l_;
};

}  // namespace covmod
