#include "covmod/validation.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "covmod/errors.hpp"
#include "covmod/simulation.hpp"
#include "covmod/text_io.hpp"

namespace covmod {

double grad_check(const LogPosterior& post, const Eigen::VectorXd& point, double step) {
  if (!(step >= 1e-7 && step <= 1e-3))
    throw ConfigError("finite-difference step must lie in [1e-7, 1e-3], got " + format_double(step));
  const Eigen::VectorXd analytic = post.gradient(point);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    Eigen::VectorXd up = point;
    Eigen::VectorXd down = point;
    up[i] += step;
    down[i] -= step;
    const double fd = (post.value(up) - post.value(down)) / (2.0 * step);
    const double rel = std::abs(fd - analytic[i]) / std::max(std::abs(analytic[i]), 1e-8);
    worst = std::max(worst, rel);
  }
  return worst;
}

Eigen::MatrixXd dense_log_posterior_hessian(const LogPosterior& post, const Eigen::VectorXd& v) {
  const auto b = static_cast<Eigen::Index>(post.num_bins());
  const Eigen::Index n = 3 * b;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto d = bin_grad_hess(post.bins()[j], TransformedParams::from(v.segment<3>(3 * j)));
    h.block<3, 3>(3 * j, 3 * j) += d.hessian;
  }
  // Prior: -(1/2) sum_k lambda_k |D t_k|^2 with D the (B-1) x B first
  // difference operator, so its Hessian is -lambda_k D^T D on chain k.
  if (b >= 2) {
    Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(b - 1, b);
    for (Eigen::Index r = 0; r + 1 < b; ++r) {
      diff(r, r) = -1.0;
      diff(r, r + 1) = 1.0;
    }
    const Eigen::MatrixXd dtd = diff.transpose() * diff;
    for (int k = 0; k < 3; ++k)
      for (Eigen::Index a = 0; a < b; ++a)
        for (Eigen::Index c = 0; c < b; ++c)
          h(3 * a + k, 3 * c + k) -= post.lambdas().lambda[k] * dtd(a, c);
  }
  h -= post.ridge() * Eigen::MatrixXd::Identity(n, n);
  return h;
}

double integrate_density(const BinParams& params) {
  using boost::math::quadrature::gauss_kronrod;
  // p = u^(1/xi) absorbs the p^(xi - 1) singularity at 0, leaving a bounded
  // integrand on [0, 1].
  const double s = 1.0 / params.xi;
  const double log_c = std::lgamma(params.xi + params.theta) - std::lgamma(params.xi) -
                       std::lgamma(params.theta);
  auto g = [&](double u) {
    const double p = std::pow(u, s);
    const double beta_part = std::exp(log_c + (params.theta - 1.0) * std::log1p(-p));
    return s * (params.pi0 * std::pow(u, s - 1.0) + (1.0 - params.pi0) * beta_part);
  };
  return gauss_kronrod<double, 61>::integrate(g, 0.0, 1.0, 15, 1e-13);
}

BinParams random_bin_params(std::uint64_t seed, std::size_t index) {
  std::mt19937_64 rng(derive_seed(seed, index));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BinParams bp;
  bp.pi0 = u(rng);
  bp.xi = 0.05 + 0.95 * u(rng);
  bp.theta = 2.0 + 48.0 * u(rng);
  return bp;
}

double normalization_audit(std::size_t n_cases, std::uint64_t seed) {
  double worst = 0.0;
  for (std::size_t i = 0; i < n_cases; ++i)
    worst = std::max(worst, std::abs(integrate_density(random_bin_params(seed, i)) - 1.0));
  return worst;
}

GaussianTarget::GaussianTarget(Eigen::VectorXd mean, Eigen::VectorXd sd)
    : mean_(std::move(mean)), sd_(std::move(sd)), state_(mean_) {}

double GaussianTarget::log_ratio(std::size_t k, double value) {
  const double a = (value - mean_[k]) / sd_[k];
  const double b = (state_[k] - mean_[k]) / sd_[k];
  return -0.5 * (a * a - b * b);
}

PosteriorTarget::PosteriorTarget(const LogPosterior& post) : post_(post) {}

void PosteriorTarget::set_state(const Eigen::VectorXd& v) {
  state_ = v;
  bin_ll_.assign(post_.num_bins(), 0.0);
  for (std::size_t j = 0; j < post_.num_bins(); ++j)
    bin_ll_[j] = bin_log_likelihood(post_.bins()[j], TransformedParams::from(v.segment<3>(3 * j)));
}

double PosteriorTarget::log_ratio(std::size_t k, double value) {
  const std::size_t j = k / 3;
  const std::size_t kind = k % 3;
  Eigen::Vector3d seg = state_.segment<3>(3 * j);
  seg[kind] = value;
  pending_ll_ = bin_log_likelihood(post_.bins()[j], TransformedParams::from(seg));
  if (!std::isfinite(pending_ll_)) return -INFINITY;
  double delta = pending_ll_ - bin_ll_[j];

  const double lambda = post_.lambdas().lambda[kind];
  const double old_v = state_[k];
  auto sq = [](double x) { return x * x; };
  if (j > 0) {
    const double left = state_[k - 3];
    delta -= 0.5 * lambda * (sq(value - left) - sq(old_v - left));
  }
  if (j + 1 < post_.num_bins()) {
    const double right = state_[k + 3];
    delta -= 0.5 * lambda * (sq(right - value) - sq(right - old_v));
  }
  const double a = post_.anchor()[k];
  delta -= 0.5 * post_.ridge() * (sq(value - a) - sq(old_v - a));
  return delta;
}

void PosteriorTarget::accept(std::size_t k, double value) {
  state_[k] = value;
  bin_ll_[k / 3] = pending_ll_;
}

McmcResult mcmc_sample(ComponentTarget& target, const Eigen::VectorXd& start,
                       const McmcOptions& options) {
  const std::size_t n = target.dim();
  if (static_cast<std::size_t>(start.size()) != n)
    throw InputError("MCMC start vector has the wrong length");
  if (options.iterations <= options.burn_in)
    throw ConfigError("MCMC needs more iterations than burn-in sweeps");
  const std::size_t kept = options.iterations - options.burn_in;
  const std::size_t batches = std::max<std::size_t>(options.batches, 2);
  const std::size_t batch_size = kept / batches;
  if (batch_size == 0) throw ConfigError("too few post-burn-in sweeps for batch means");

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::VectorXd state = start;
  target.set_state(state);
  Eigen::VectorXd log_scale = Eigen::VectorXd::Constant(n, std::log(options.initial_scale));
  Eigen::VectorXd window_accepts = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd accepts = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd batch_sums = Eigen::MatrixXd::Zero(n, batches);
  std::size_t adapt_round = 0;

  for (std::size_t it = 0; it < options.iterations; ++it) {
    for (std::size_t k = 0; k < n; ++k) {
      const double proposal = state[k] + std::exp(log_scale[k]) * normal(rng);
      const double lr = target.log_ratio(k, proposal);
      if (std::log(unif(rng)) < lr) {
        target.accept(k, proposal);
        state[k] = proposal;
        if (it < options.burn_in)
          window_accepts[k] += 1.0;
        else
          accepts[k] += 1.0;
      }
    }
    if (it < options.burn_in) {
      if ((it + 1) % options.adapt_every == 0) {
        ++adapt_round;
        const double step = std::clamp(1.0 / std::sqrt(static_cast<double>(adapt_round)), 0.02, 0.5);
        for (std::size_t k = 0; k < n; ++k) {
          const double rate = window_accepts[k] / static_cast<double>(options.adapt_every);
          if (rate > 0.35)
            log_scale[k] += step;
          else
            log_scale[k] -= step;
        }
        window_accepts.setZero();
      }
    } else {
      const std::size_t idx = (it - options.burn_in) / batch_size;
      if (idx < batches) batch_sums.col(static_cast<Eigen::Index>(idx)) += state;
    }
  }

  McmcResult res;
  const Eigen::MatrixXd batch_means = batch_sums / static_cast<double>(batch_size);
  res.mean = batch_means.rowwise().mean();
  res.mcse = Eigen::VectorXd(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double var = (batch_means.row(k).array() - res.mean[k]).square().sum() /
                       static_cast<double>(batches - 1);
    res.mcse[k] = std::sqrt(var / static_cast<double>(batches));
  }
  res.scale = log_scale.array().exp();
  res.acceptance = accepts / static_cast<double>(kept);
  res.acceptance_rate = res.acceptance.mean();
  for (std::size_t k = 0; k < n; ++k) {
    if (res.acceptance[k] < 0.05 || res.acceptance[k] > 0.8) {
      res.diagnostics_ok = false;
      res.diagnostic = "component " + std::to_string(k) + " acceptance rate " +
                       format_double(res.acceptance[k]) + " outside [0.05, 0.8]";
      break;
    }
  }
  return res;
}

McmcResult mcmc_sample(const Dataset& ds, const ModelFit& fit, const McmcOptions& options) {
  const auto per_bin = split_by_bin(ds, fit.layout);
  std::vector<PValueBin> bins;
  bins.reserve(per_bin.size());
  for (const auto& pv : per_bin) bins.emplace_back(pv);
  const LogPosterior post(std::move(bins), fit.lambdas, fit.ridge, fit.initial);
  PosteriorTarget target(post);
  return mcmc_sample(target, fit.mode, options);
}

}  // namespace covmod
