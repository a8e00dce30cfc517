#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "covmod/ingest.hpp"

namespace covmod {

// pi0(x) = exp(-alpha - (beta - alpha) x^gamma), decreasing iff alpha > beta.
struct CurveParams {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 1.0;
};

double pi0_curve(double x, const CurveParams& curve);

// Mean of pi0_curve over [0, 1] (closed form, incomplete gamma series).
double pi0_curve_mean(const CurveParams& curve);

// Finds gamma with mean(pi0) = pibar0 by bisection on log gamma over
// [log 1e-3, log 1e3]. Throws ConfigError when the target is not strictly
// between the endpoints or the endpoints coincide.
double solve_gamma(double pibar0, double pi0_at_0, double pi0_at_1);

struct SimConfig {
  std::size_t m = 30000;
  double pibar0 = 0.5;
  double pi0_at_0 = 0.55;
  double pi0_at_1 = 0.45;
  double mu = 2.0;
  std::size_t bins = 10;
  double c = 1.0;
  std::uint64_t seed = 1;
};

// Validates the configuration and solves for (alpha, beta, gamma).
CurveParams calibrate(const SimConfig& config);

struct SimTruth {
  std::vector<bool> is_null;
  std::vector<double> posterior;
};

// Exact P(H0 | p, x) for the normal-shift generator:
// pi0 phi(z) / (pi0 phi(z) + (1 - pi0) phi(z - mu)), z = Phi^-1(1 - p).
double true_posterior(double p, double x, const CurveParams& curve, double mu);
double true_posterior(double p, double x, const SimConfig& config);

// Independent stream seed for replicate r (SplitMix64 mixing).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

using SimRng = std::mt19937_64;

// x ~ U[0,1]; H0 with probability pi0(x); z ~ N(0,1) under H0, N(mu,1) else;
// p = 1 - Phi(z), clipped.
std::pair<Dataset, SimTruth> simulate(const SimConfig& config);

struct CurveSet {
  std::string method;           // "binned" or "one-bin"
  std::size_t bin = 0;          // 0-based reporting bin
  std::vector<double> truth;    // on the p-grid at the bin's nominal midpoint
  std::vector<double> q05;
  std::vector<double> median;
  std::vector<double> q95;
};

struct ReplicateSummary {
  std::vector<double> p_grid;
  std::vector<std::size_t> reporting_bins;  // 0-based
  std::vector<CurveSet> curves;             // binned curves first, then one-bin
  std::size_t replicates = 0;
  std::size_t failures = 0;
  std::vector<double> onebin_pi0;  // per successful replicate
  CurveParams curve;
};

// 101 points spaced evenly on [0.001, 0.1].
std::vector<double> default_p_grid();
// Bins 1, 3, 5, ... in 1-based numbering.
std::vector<std::size_t> default_reporting_bins(std::size_t bins);

// Per-replicate estimated curves on the grid: curves[bin][grid] for the
// binned model, plus the one-bin curve and pi0.
struct ReplicateCurves {
  std::vector<std::vector<double>> binned;
  std::vector<double> onebin;
  double onebin_pi0 = 1.0;
};
ReplicateCurves run_replicate(const SimConfig& config, const std::vector<double>& p_grid,
                              const std::vector<std::size_t>& reporting_bins);

struct ReplicateOptions {
  std::size_t jobs = 1;
  bool identical_seeds = false;  // every replicate reuses config.seed
};

// Pointwise 5%/50%/95% quantiles (linear interpolation between order
// statistics) across replicates r = 0..R-1 with seeds derive_seed(seed, r).
// Failed or non-converged fits are excluded and counted. Worker threads
// share the replicates; the result does not depend on the thread count.
ReplicateSummary replicate_summary(const SimConfig& config, std::size_t replicates,
                                   const ReplicateOptions& options = {});

double quantile(std::vector<double> values, double prob);

}  // namespace covmod
