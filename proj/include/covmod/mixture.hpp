#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

namespace covmod {

// Uniform-beta mixture parameters for one bin. The density is nonincreasing
// and convex exactly when xi <= 1 and theta >= 2.
struct BinParams {
  double pi0 = 0.5;
  double xi = 0.5;
  double theta = 3.0;
};

// Unconstrained image: pi0_t = logit(pi0), xi_t = logit(xi),
// theta_t = log(theta - 2).
struct TransformedParams {
  double pi0_t = 0.0;
  double xi_t = 0.0;
  double theta_t = 0.0;

  Eigen::Vector3d vec() const { return {pi0_t, xi_t, theta_t}; }
  static TransformedParams from(const Eigen::Ref<const Eigen::Vector3d>& v) {
    return {v[0], v[1], v[2]};
  }
  bool operator==(const TransformedParams&) const = default;
};

enum class ParamKind { pi0 = 0, xi = 1, theta = 2 };

inline double logistic(double a) {
  return a >= 0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
}

// Throws InputError on boundary values (infinite image) or invalid params.
TransformedParams to_transformed(const BinParams& params);
BinParams to_natural(const TransformedParams& t);

// Mixture density at p in (0, 1]. Accepts the closed constraint set
// pi0 in [0,1], xi in (0,1], theta >= 2.
double mix_density(double p, const BinParams& params);

// P(H0 | p) = pi0 / f(p) within one bin.
double null_posterior(double p, const BinParams& params);
double null_posterior(double p, const TransformedParams& t);
// Gradient of null_posterior with respect to (pi0_t, xi_t, theta_t).
Eigen::Vector3d null_posterior_gradient(double p, const TransformedParams& t);

// p-values of one bin together with cached log p and log(1 - p).
class PValueBin {
 public:
  PValueBin() = default;
  explicit PValueBin(std::span<const double> p);

  std::size_t size() const { return p_.size(); }
  bool empty() const { return p_.empty(); }
  const std::vector<double>& p() const { return p_; }
  const std::vector<double>& log_p() const { return log_p_; }
  const std::vector<double>& log_q() const { return log_q_; }

 private:
  std::vector<double> p_;
  std::vector<double> log_p_;
  std::vector<double> log_q_;
};

// |xi_t| and |theta_t| beyond this leave the range where the digamma and
// trigamma terms are representable; the likelihood is -inf out there.
inline constexpr double kShapeBound = 300.0;
bool in_shape_range(const TransformedParams& t);

double bin_log_likelihood(const PValueBin& bin, const TransformedParams& t);
double bin_log_likelihood(std::span<const double> pvec, const TransformedParams& t);

struct BinDerivatives {
  double value = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();
};

// Exact first and second derivatives of the bin log-likelihood in
// transformed coordinates. Outside in_shape_range the value is -inf and the
// derivatives are zero.
BinDerivatives bin_grad_hess(const PValueBin& bin, const TransformedParams& t);
BinDerivatives bin_grad_hess(std::span<const double> pvec, const TransformedParams& t);

}  // namespace covmod
