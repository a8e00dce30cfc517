#include "covmod/banded.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace covmod {

BandedSymmetricMatrix::BandedSymmetricMatrix(std::size_t n, std::size_t bandwidth)
    : n_(n), bw_(bandwidth), data_(n * (bandwidth + 1), 0.0) {}

std::size_t BandedSymmetricMatrix::index(std::size_t i, std::size_t j) const {
  if (i < j) std::swap(i, j);
  assert(i - j <= bw_ && i < n_);
  return i * (bw_ + 1) + (i - j);
}

double& BandedSymmetricMatrix::at(std::size_t i, std::size_t j) {
  return data_[index(i, j)];
}

double BandedSymmetricMatrix::operator()(std::size_t i, std::size_t j) const {
  if (!in_band(i, j)) return 0.0;
  return data_[index(i, j)];
}

void BandedSymmetricMatrix::add_to_diagonal(double v) {
  for (std::size_t i = 0; i < n_; ++i) at(i, i) += v;
}

Eigen::MatrixXd BandedSymmetricMatrix::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_, n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = (i > bw_ ? i - bw_ : 0); j <= i; ++j)
      m(i, j) = m(j, i) = (*this)(i, j);
  return m;
}

std::optional<BandedCholesky> BandedCholesky::factor(const BandedSymmetricMatrix& a) {
  const std::size_t n = a.size();
  const std::size_t bw = a.bandwidth();
  BandedSymmetricMatrix l(n, bw);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k0 = j > bw ? j - bw : 0;
    double d = a(j, j);
    for (std::size_t k = k0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    const double ljj = std::sqrt(d);
    l.at(j, j) = ljj;
    const std::size_t i_end = std::min(n, j + bw + 1);
    for (std::size_t i = j + 1; i < i_end; ++i) {
      double s = a(i, j);
      const std::size_t ki = i > bw ? i - bw : 0;
      for (std::size_t k = std::max(k0, ki); k < j; ++k) s -= l(i, k) * l(j, k);
      l.at(i, j) = s / ljj;
    }
  }
  return BandedCholesky(std::move(l));
}

Eigen::VectorXd BandedCholesky::solve(const Eigen::VectorXd& b) const {
  const std::size_t n = l_.size();
  const std::size_t bw = l_.bandwidth();
  Eigen::VectorXd y = b;
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[i];
    for (std::size_t k = (i > bw ? i - bw : 0); k < i; ++k) s -= l_(i, k) * y[k];
    y[i] = s / l_(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    const std::size_t k_end = std::min(n, ii + bw + 1);
    for (std::size_t k = ii + 1; k < k_end; ++k) s -= l_(k, ii) * y[k];
    y[ii] = s / l_(ii, ii);
  }
  return y;
}

Eigen::MatrixXd BandedCholesky::solve(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd out(b.rows(), b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) out.col(c) = solve(Eigen::VectorXd(b.col(c)));
  return out;
}

double BandedCholesky::log_determinant() const {
  double s = 0.0;
  for (std::size_t i = 0; i < l_.size(); ++i) s += std::log(l_(i, i));
  return 2.0 * s;
}

}  // namespace covmod
