#include "covmod/mixture.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>

#include "covmod/errors.hpp"
#include "covmod/text_io.hpp"

namespace covmod {

namespace {

// log(e^a + e^b) without overflow.
double log_add(double a, double b) {
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  if (hi == -INFINITY) return -INFINITY;
  return hi + std::log1p(std::exp(lo - hi));
}

// log sigma(a) = -log(1 + e^-a)
double log_logistic(double a) {
  return a >= 0 ? -std::log1p(std::exp(-a)) : a - std::log1p(std::exp(a));
}

// Quantities that depend on the bin parameters but not on p.
struct Kernel {
  double log_pi0;
  double log_1m_pi0;
  double pi0;
  double xi;
  double one_m_xi;
  double theta;
  double theta_m2;
  double log_norm;  // log Gamma(xi+theta) - log Gamma(xi) - log Gamma(theta)

  explicit Kernel(const TransformedParams& t)
      : log_pi0(log_logistic(t.pi0_t)),
        log_1m_pi0(log_logistic(-t.pi0_t)),
        pi0(logistic(t.pi0_t)),
        xi(logistic(t.xi_t)),
        one_m_xi(logistic(-t.xi_t)),
        theta_m2(std::exp(t.theta_t)) {
    theta = 2.0 + theta_m2;
    log_norm = std::lgamma(xi + theta) - std::lgamma(xi) - std::lgamma(theta);
  }

  double log_beta(double log_p, double log_q) const {
    return log_norm - one_m_xi * log_p + (theta - 1.0) * log_q;
  }
};

}  // namespace

TransformedParams to_transformed(const BinParams& params) {
  const auto& [pi0, xi, theta] = params;
  if (!(pi0 > 0.0 && pi0 < 1.0))
    throw InputError("pi0 = " + format_double(pi0) + " has no finite logit");
  if (!(xi > 0.0 && xi < 1.0))
    throw InputError("xi = " + format_double(xi) + " has no finite logit");
  if (!(theta > 2.0) || !std::isfinite(theta))
    throw InputError("theta = " + format_double(theta) + " has no finite log(theta - 2)");
  return {std::log(pi0 / (1.0 - pi0)), std::log(xi / (1.0 - xi)), std::log(theta - 2.0)};
}

BinParams to_natural(const TransformedParams& t) {
  return {logistic(t.pi0_t), logistic(t.xi_t), 2.0 + std::exp(t.theta_t)};
}

double mix_density(double p, const BinParams& params) {
  const auto& [pi0, xi, theta] = params;
  if (pi0 == 1.0) return 1.0;
  double log_beta = std::lgamma(xi + theta) - std::lgamma(xi) - std::lgamma(theta);
  if (xi != 1.0) log_beta += (xi - 1.0) * std::log(p);
  log_beta += (theta - 1.0) * std::log1p(-p);
  return pi0 + (1.0 - pi0) * std::exp(log_beta);
}

double null_posterior(double p, const BinParams& params) {
  return params.pi0 / mix_density(p, params);
}

double null_posterior(double p, const TransformedParams& t) {
  const Kernel k(t);
  const double lb = k.log_1m_pi0 + k.log_beta(std::log(p), std::log1p(-p));
  return std::exp(k.log_pi0 - log_add(k.log_pi0, lb));
}

Eigen::Vector3d null_posterior_gradient(double p, const TransformedParams& t) {
  const Kernel k(t);
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double lb = k.log_1m_pi0 + k.log_beta(log_p, log_q);
  const double lf = log_add(k.log_pi0, lb);
  const double q = std::exp(k.log_pi0 - lf);
  const double w = std::exp(lb - lf);
  const double s = boost::math::digamma(k.xi + k.theta);
  const double dl_dxi_t = (s - boost::math::digamma(k.xi) + log_p) * k.xi * k.one_m_xi;
  const double dl_dtheta_t = (s - boost::math::digamma(k.theta) + log_q) * k.theta_m2;
  return {q * w, -q * w * dl_dxi_t, -q * w * dl_dtheta_t};
}

PValueBin::PValueBin(std::span<const double> p) : p_(p.begin(), p.end()) {
  log_p_.reserve(p_.size());
  log_q_.reserve(p_.size());
  for (double v : p_) {
    if (!(v > 0.0 && v <= 1.0))
      throw InputError("p-value " + format_double(v) + " is outside (0, 1]");
    log_p_.push_back(std::log(v));
    log_q_.push_back(std::log1p(-v));
  }
}

bool in_shape_range(const TransformedParams& t) {
  return std::abs(t.xi_t) <= kShapeBound && std::abs(t.theta_t) <= kShapeBound &&
         !std::isnan(t.pi0_t);
}

double bin_log_likelihood(const PValueBin& bin, const TransformedParams& t) {
  if (!in_shape_range(t)) return -INFINITY;
  const Kernel k(t);
  double ll = 0.0;
  const auto& lp = bin.log_p();
  const auto& lq = bin.log_q();
  for (std::size_t h = 0; h < bin.size(); ++h)
    ll += log_add(k.log_pi0, k.log_1m_pi0 + k.log_beta(lp[h], lq[h]));
  return ll;
}

double bin_log_likelihood(std::span<const double> pvec, const TransformedParams& t) {
  return bin_log_likelihood(PValueBin(pvec), t);
}

BinDerivatives bin_grad_hess(const PValueBin& bin, const TransformedParams& t) {
  using boost::math::digamma;
  using boost::math::trigamma;
  if (!in_shape_range(t)) {
    BinDerivatives out;
    out.value = -INFINITY;
    return out;
  }
  const Kernel k(t);

  // Chain-rule factors for xi = logistic(xi_t) and theta = 2 + exp(theta_t).
  const double dxi = k.xi * k.one_m_xi;
  const double d2xi = dxi * (k.one_m_xi - k.xi);
  const double dth = k.theta_m2;
  const double d2th = k.theta_m2;

  const double psi_sum = digamma(k.xi + k.theta);
  const double psi_xi = digamma(k.xi);
  const double psi_th = digamma(k.theta);
  const double tri_sum = trigamma(k.xi + k.theta);
  const double tri_xi = trigamma(k.xi);
  const double tri_th = trigamma(k.theta);

  // Second derivatives of the log beta density that do not depend on p.
  const double lbb_const = (tri_sum - tri_xi) * dxi * dxi;
  const double lcc_const = (tri_sum - tri_th) * dth * dth;
  const double lbc = tri_sum * dxi * dth;

  double ll = 0.0;
  double ga = 0.0, gb = 0.0, gc = 0.0;
  double haa = 0.0, hab = 0.0, hac = 0.0, hbb = 0.0, hbc = 0.0, hcc = 0.0;

  const auto& lp = bin.log_p();
  const auto& lq = bin.log_q();
  for (std::size_t h = 0; h < bin.size(); ++h) {
    const double lb = k.log_1m_pi0 + k.log_beta(lp[h], lq[h]);
    const double lf = log_add(k.log_pi0, lb);
    ll += lf;
    // q: posterior weight of the uniform component, w = 1 - q.
    const double q = std::exp(k.log_pi0 - lf);
    const double w = std::exp(lb - lf);

    const double l_xi = psi_sum - psi_xi + lp[h];
    const double l_th = psi_sum - psi_th + lq[h];
    const double lb_ = l_xi * dxi;
    const double lc_ = l_th * dth;
    const double lbb = lbb_const + l_xi * d2xi;
    const double lcc = lcc_const + l_th * d2th;

    const double qa = q - k.pi0;
    ga += qa;
    gb += w * lb_;
    gc += w * lc_;

    haa += (1.0 - 2.0 * k.pi0) * qa - qa * qa;
    hab -= w * q * lb_;
    hac -= w * q * lc_;
    const double wq = w * q;
    hbb += w * lbb + wq * lb_ * lb_;
    hcc += w * lcc + wq * lc_ * lc_;
    hbc += w * lbc + wq * lb_ * lc_;
  }

  BinDerivatives d;
  d.value = ll;
  d.gradient = {ga, gb, gc};
  d.hessian << haa, hab, hac, hab, hbb, hbc, hac, hbc, hcc;
  return d;
}

BinDerivatives bin_grad_hess(std::span<const double> pvec, const TransformedParams& t) {
  return bin_grad_hess(PValueBin(pvec), t);
}

}  // namespace covmod
