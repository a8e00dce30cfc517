#include "covmod/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdio>
#include <optional>
#include <thread>

#include "covmod/binning.hpp"
#include "covmod/errors.hpp"
#include "covmod/posterior.hpp"
#include "covmod/smoothing_fit.hpp"
#include "covmod/text_io.hpp"

namespace covmod {

double pi0_curve(double x, const CurveParams& curve) {
  return std::exp(-curve.alpha - (curve.beta - curve.alpha) * std::pow(x, curve.gamma));
}

double pi0_curve_mean(const CurveParams& curve) {
  // closed form via the lower incomplete gamma function, written as the
  // positive Kummer series so large 1/gamma does not overflow
  const double b = curve.beta - curve.alpha;
  const double s = 1.0 / curve.gamma;
  if (b == 0.0) return std::exp(-curve.alpha);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 100000; ++k) {
    term *= b / (s + k);
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return std::exp(-curve.beta) * sum;
}

double solve_gamma(double pibar0, double pi0_at_0, double pi0_at_1) {
  for (double v : {pibar0, pi0_at_0, pi0_at_1})
    if (!(v > 0.0 && v <= 1.0))
      throw ConfigError("pi0 values must lie in (0, 1], got " + format_double(v));
  if (pi0_at_0 == pi0_at_1)
    throw ConfigError("gamma is undetermined when pi0(0) == pi0(1)");
  const double lo_val = std::min(pi0_at_0, pi0_at_1);
  const double hi_val = std::max(pi0_at_0, pi0_at_1);
  if (!(pibar0 > lo_val && pibar0 < hi_val))
    throw ConfigError("target mean pi0 " + format_double(pibar0) +
                      " is not strictly between the endpoints " + format_double(lo_val) +
                      " and " + format_double(hi_val));

  CurveParams curve{-std::log(pi0_at_0), -std::log(pi0_at_1), 1.0};
  // mean(gamma) moves monotonically from pi0(1) (gamma -> 0) to pi0(0)
  // (gamma -> infinity).
  auto residual = [&](double log_gamma) {
    curve.gamma = std::exp(log_gamma);
    return pi0_curve_mean(curve) - pibar0;
  };
  double lo = std::log(1e-3);
  double hi = std::log(1e3);
  const double r_lo = residual(lo);
  const double r_hi = residual(hi);
  if (r_lo * r_hi > 0.0)
    throw ConfigError("target mean pi0 " + format_double(pibar0) +
                      " is not reachable with gamma in [1e-3, 1e3]");
  const bool increasing = r_hi > r_lo;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double r = residual(mid);
    if (r == 0.0) return std::exp(mid);
    if ((r < 0.0) == increasing)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

CurveParams calibrate(const SimConfig& config) {
  if (config.m < 1) throw ConfigError("simulation needs m >= 1");
  if (!(config.pi0_at_0 > config.pi0_at_1))
    throw ConfigError("only decreasing pi0 curves are supported: need pi0(0) > pi0(1)");
  if (!std::isfinite(config.mu)) throw ConfigError("alternative mean must be finite");
  return {-std::log(config.pi0_at_0), -std::log(config.pi0_at_1),
          solve_gamma(config.pibar0, config.pi0_at_0, config.pi0_at_1)};
}

double true_posterior(double p, double x, const CurveParams& curve, double mu) {
  const boost::math::normal_distribution<double> std_normal;
  const double z = boost::math::quantile(boost::math::complement(std_normal, p));
  const double pi0 = pi0_curve(x, curve);
  // phi(z - mu) / phi(z) = exp(mu z - mu^2 / 2)
  const double log_lr = mu * z - 0.5 * mu * mu;
  const double log_odds_alt = std::log1p(-pi0) - std::log(pi0) + log_lr;
  return 1.0 / (1.0 + std::exp(log_odds_alt));
}

double true_posterior(double p, double x, const SimConfig& config) {
  return true_posterior(p, x, calibrate(config), config.mu);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::pair<Dataset, SimTruth> simulate(const SimConfig& config) {
  const CurveParams curve = calibrate(config);
  SimRng rng(config.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int width = static_cast<int>(std::to_string(config.m).size());
  std::vector<TestRecord> records;
  records.reserve(config.m);
  SimTruth truth;
  truth.is_null.reserve(config.m);
  truth.posterior.reserve(config.m);
  for (std::size_t i = 0; i < config.m; ++i) {
    const double x = unif(rng);
    const bool is_null = unif(rng) < pi0_curve(x, curve);
    const double z = normal(rng) + (is_null ? 0.0 : config.mu);
    TestRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "t%0*zu", width, i + 1);
    rec.id = id;
    rec.x = x;
    rec.p = clip_p(z_to_p(z));
    truth.is_null.push_back(is_null);
    truth.posterior.push_back(true_posterior(rec.p, x, curve, config.mu));
    records.push_back(std::move(rec));
  }
  return {Dataset(std::move(records)), std::move(truth)};
}

std::vector<double> default_p_grid() {
  std::vector<double> grid(101);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = 0.001 + (0.1 - 0.001) * static_cast<double>(i) / 100.0;
  return grid;
}

std::vector<std::size_t> default_reporting_bins(std::size_t bins) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < bins; j += 2) out.push_back(j);
  return out;
}

ReplicateCurves run_replicate(const SimConfig& config, const std::vector<double>& p_grid,
                              const std::vector<std::size_t>& reporting_bins) {
  const auto [ds, truth] = simulate(config);
  FitOptions opts;
  opts.c = config.c;
  const BinLayout layout = quantile_bins(ds, config.bins, std::nullopt, 1);
  const ModelFit fit = fit_joint(ds, layout, opts);
  const OneBinSummary one = fit_one_bin(ds, opts);
  if (!fit.converged || !one.fit.converged)
    throw NumericalError("replicate fit did not converge");

  ReplicateCurves out;
  for (std::size_t j : reporting_bins) {
    const TransformedParams t = fit.transformed(j);
    std::vector<double> curve;
    curve.reserve(p_grid.size());
    for (double p : p_grid) curve.push_back(null_posterior(p, t));
    out.binned.push_back(std::move(curve));
  }
  const TransformedParams t1 = one.fit.transformed(0);
  for (double p : p_grid) out.onebin.push_back(null_posterior(p, t1));
  out.onebin_pi0 = one.pi0_hat;
  return out;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ReplicateSummary replicate_summary(const SimConfig& config, std::size_t replicates,
                                   const ReplicateOptions& options) {
  if (replicates < 2) throw ConfigError("replicate summary needs at least 2 replicates");
  ReplicateSummary summary;
  summary.curve = calibrate(config);
  summary.p_grid = default_p_grid();
  summary.reporting_bins = default_reporting_bins(config.bins);
  summary.replicates = replicates;

  std::vector<std::optional<ReplicateCurves>> results(replicates);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t r = next++; r < replicates; r = next++) {
      SimConfig cfg = config;
      cfg.seed = options.identical_seeds ? config.seed : derive_seed(config.seed, r);
      try {
        results[r] = run_replicate(cfg, summary.p_grid, summary.reporting_bins);
      } catch (const NumericalError&) {
        results[r].reset();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, replicates);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<const ReplicateCurves*> ok;
  for (const auto& r : results) {
    if (r)
      ok.push_back(&*r);
    else
      ++summary.failures;
  }
  for (const auto* r : ok) summary.onebin_pi0.push_back(r->onebin_pi0);

  const std::size_t g = summary.p_grid.size();
  auto summarize = [&](const std::string& method, std::size_t bin, auto&& pick) {
    CurveSet cs;
    cs.method = method;
    cs.bin = bin;
    const double x_mid = (static_cast<double>(bin) + 0.5) / static_cast<double>(config.bins);
    for (std::size_t i = 0; i < g; ++i) {
      std::vector<double> vals;
      vals.reserve(ok.size());
      for (const auto* r : ok) vals.push_back(pick(*r, i));
      cs.truth.push_back(true_posterior(summary.p_grid[i], x_mid, summary.curve, config.mu));
      cs.q05.push_back(quantile(vals, 0.05));
      cs.median.push_back(quantile(vals, 0.5));
      cs.q95.push_back(quantile(vals, 0.95));
    }
    summary.curves.push_back(std::move(cs));
  };
  for (std::size_t k = 0; k < summary.reporting_bins.size(); ++k)
    summarize("binned", summary.reporting_bins[k],
              [k](const ReplicateCurves& r, std::size_t i) { return r.binned[k][i]; });
  for (std::size_t j : summary.reporting_bins)
    summarize("one-bin", j, [](const ReplicateCurves& r, std::size_t i) { return r.onebin[i]; });
  return summary;
}

}  // namespace covmod
