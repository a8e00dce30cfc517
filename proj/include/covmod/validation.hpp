#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "covmod/binning.hpp"
#include "covmod/ingest.hpp"
#include "covmod/mixture.hpp"
#include "covmod/smoothing_fit.hpp"

namespace covmod {

// Max over components of |central difference - analytic| / max(|analytic|, 1e-8).
// Throws ConfigError for step outside [1e-7, 1e-3].
double grad_check(const LogPosterior& post, const Eigen::VectorXd& point, double step);

// Dense Hessian of the log posterior assembled entry by entry from the
// per-bin blocks and the explicit difference-operator form of the prior,
// without going through the banded code path.
Eigen::MatrixXd dense_log_posterior_hessian(const LogPosterior& post, const Eigen::VectorXd& v);

// Integral of mix_density over [0, 1] by Gauss-Kronrod after the change of
// variables p = u^(1/xi).
double integrate_density(const BinParams& params);

// Worst |integral - 1| over n_cases random parameter triples.
double normalization_audit(std::size_t n_cases, std::uint64_t seed);
BinParams random_bin_params(std::uint64_t seed, std::size_t index);

// Target for componentwise Metropolis: the sampler asks for the log density
// ratio of changing one coordinate of the current state.
class ComponentTarget {
 public:
  virtual ~ComponentTarget() = default;
  virtual std::size_t dim() const = 0;
  virtual void set_state(const Eigen::VectorXd& v) = 0;
  virtual double log_ratio(std::size_t k, double value) = 0;
  // Commits the proposal most recently passed to log_ratio.
  virtual void accept(std::size_t k, double value) = 0;
};

// Independent Gaussian coordinates; calibrates the sampler in tests.
class GaussianTarget final : public ComponentTarget {
 public:
  GaussianTarget(Eigen::VectorXd mean, Eigen::VectorXd sd);
  std::size_t dim() const override { return static_cast<std::size_t>(mean_.size()); }
  void set_state(const Eigen::VectorXd& v) override { state_ = v; }
  double log_ratio(std::size_t k, double value) override;
  void accept(std::size_t k, double value) override { state_[k] = value; }

 private:
  Eigen::VectorXd mean_, sd_, state_;
};

// The ridge-augmented joint log posterior, with per-bin log-likelihoods
// cached so one coordinate update costs a single bin evaluation.
class PosteriorTarget final : public ComponentTarget {
 public:
  explicit PosteriorTarget(const LogPosterior& post);
  std::size_t dim() const override { return post_.dim(); }
  void set_state(const Eigen::VectorXd& v) override;
  double log_ratio(std::size_t k, double value) override;
  void accept(std::size_t k, double value) override;

 private:
  const LogPosterior& post_;
  Eigen::VectorXd state_;
  std::vector<double> bin_ll_;
  double pending_ll_ = 0.0;
};

struct McmcOptions {
  std::size_t iterations = 50000;  // sweeps, burn-in included
  std::size_t burn_in = 10000;
  std::uint64_t seed = 1;
  std::size_t batches = 50;
  std::size_t adapt_every = 50;
  double initial_scale = 0.1;
};

struct McmcResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd mcse;        // batch means
  Eigen::VectorXd scale;       // proposal sd after adaptation
  Eigen::VectorXd acceptance;  // per component, after burn-in
  double acceptance_rate = 0.0;
  bool diagnostics_ok = true;
  std::string diagnostic;
};

// Componentwise random-walk Metropolis. Proposal scales adapt during
// burn-in toward an acceptance rate in [0.2, 0.5]; a post-burn-in rate
// outside [0.05, 0.8] is reported as a diagnostic failure.
McmcResult mcmc_sample(ComponentTarget& target, const Eigen::VectorXd& start,
                       const McmcOptions& options);

// Samples the same target the fit maximized (lambdas, ridge and anchor taken
// from `fit`), starting at the mode.
McmcResult mcmc_sample(const Dataset& ds, const ModelFit& fit, const McmcOptions& options);

}  // namespace covmod
