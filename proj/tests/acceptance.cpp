// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "covmod/binning.hpp"
#include "covmod/mixture.hpp"
#include "covmod/posterior.hpp"
#include "covmod/simulation.hpp"
#include "covmod/smoothing_fit.hpp"
#include "covmod/text_io.hpp"
#include "covmod/validation.hpp"

using namespace covmod;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL") << "  " << detail << std::endl;
  if (!ok) ++failures;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

SimConfig study_config(double pibar0, double at0, double at1) {
  SimConfig c;
  c.m = 30000;
  c.bins = 10;
  c.c = 1.0;
  c.mu = 2.0;
  c.pibar0 = pibar0;
  c.pi0_at_0 = at0;
  c.pi0_at_1 = at1;
  c.seed = 20240601;
  return c;
}

double curve_error(const CurveSet& cs) {
  double s = 0.0;
  for (std::size_t i = 0; i < cs.truth.size(); ++i) s += std::abs(cs.median[i] - cs.truth[i]);
  return s / static_cast<double>(cs.truth.size());
}

const CurveSet& find_curve(const ReplicateSummary& s, const std::string& method, std::size_t bin) {
  for (const auto& cs : s.curves)
    if (cs.method == method && cs.bin == bin) return cs;
  throw std::runtime_error("missing curve");
}

double mean_binned_error(const ReplicateSummary& s) {
  double total = 0.0;
  for (std::size_t j : s.reporting_bins) total += curve_error(find_curve(s, "binned", j));
  return total / static_cast<double>(s.reporting_bins.size());
}

ReplicateSummary run_study(const SimConfig& c) {
  ReplicateOptions opt;
  opt.jobs = std::max(1u, std::thread::hardware_concurrency());
  return replicate_summary(c, 100, opt);
}

void weak_case(int n, const ReplicateSummary& s) {
  const double err = mean_binned_error(s);
  report(n, err <= 0.05 && s.failures == 0,
         "mean |median - truth| over bins 1,3,5,7,9 = " + num(err) + " (<= 0.05), replicates " +
             std::to_string(s.replicates) + ", failures " + std::to_string(s.failures));
}

bool conservative(const ReplicateSummary& s, double pibar0, std::string& detail) {
  const auto [lo, hi] = std::minmax_element(s.onebin_pi0.begin(), s.onebin_pi0.end());
  detail += "pibar0 " + num(pibar0) + ": one-bin pi0 in [" + num(*lo) + ", " + num(*hi) + "] over " +
            std::to_string(s.onebin_pi0.size()) + " replicates; ";
  return s.onebin_pi0.size() == 100 && *lo >= pibar0 - 0.05 && *hi <= pibar0 + 0.1 &&
         *lo >= pibar0 - 0.1;
}

Dataset strong_small(std::size_t m, std::uint64_t seed) {
  SimConfig c;
  c.m = m;
  c.pibar0 = 0.5;
  c.pi0_at_0 = 0.9;
  c.pi0_at_1 = 0.1;
  c.seed = seed;
  return simulate(c).first;
}

LogPosterior posterior_of(const Dataset& ds, const ModelFit& fit) {
  std::vector<PValueBin> bins;
  for (const auto& p : split_by_bin(ds, fit.layout)) bins.emplace_back(p);
  return LogPosterior(std::move(bins), fit.lambdas, fit.ridge, fit.initial);
}

// Runs the installed executable, returning stdout and the exit status.
int run_exe(const std::string& args, const fs::path& stdout_file) {
  const std::string cmd = std::string("\"") + COVMOD_EXE + "\" " + args + " > \"" +
                          stdout_file.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

std::string snapshot(const fs::path& dir, const fs::path& stdout_file) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string out = "[stdout]\n" + read_file(stdout_file);
  for (const auto& f : files) out += "[" + f.filename().string() + "]\n" + read_file(f);
  return out;
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();

  // 1, 2, 11: weak-modulation studies
  const SimConfig weak1 = study_config(0.5, 0.55, 0.45);
  const SimConfig weak2 = study_config(0.9, 0.95, 0.85);
  const ReplicateSummary s1 = run_study(weak1);
  weak_case(1, s1);
  const ReplicateSummary s2 = run_study(weak2);
  weak_case(2, s2);

  // 3: strong modulation
  {
    const ReplicateSummary s3 = run_study(study_config(0.5, 0.9, 0.1));
    bool ok = s3.failures == 0;
    std::string detail;
    for (std::size_t bin : {0u, 8u}) {
      const double binned = curve_error(find_curve(s3, "binned", bin));
      const double onebin = curve_error(find_curve(s3, "one-bin", bin));
      ok = ok && onebin >= 2.0 * binned;
      detail += "bin " + std::to_string(bin + 1) + ": one-bin " + num(onebin) + " vs 10-bin " +
                num(binned) + " (ratio " + num(onebin / binned) + "); ";
    }
    report(3, ok, detail + "failures " + std::to_string(s3.failures));
  }

  // 4: gamma calibration against independent quadrature
  {
    boost::math::quadrature::tanh_sinh<double> ts;
    double worst = 0.0;
    for (const SimConfig& c : {weak1, weak2, study_config(0.5, 0.9, 0.1)}) {
      const CurveParams curve = calibrate(c);
      const double mean = ts.integrate([&](double x) { return pi0_curve(x, curve); }, 0.0, 1.0);
      worst = std::max(worst, std::abs(mean - c.pibar0));
    }
    report(4, worst <= 1e-8, "max |integral - pibar0| = " + num(worst) + " (<= 1e-8)");
  }

  // 5: derivative oracles
  {
    const Dataset ds = strong_small(2000, 5);
    const ModelFit fit = fit_joint(ds, quantile_bins(ds, 5, std::nullopt, 50));
    const LogPosterior post = posterior_of(ds, fit);
    std::mt19937_64 rng(55);
    std::normal_distribution<double> jitter(0.0, 0.5);
    double worst_joint = 0.0;
    for (int i = 0; i < 20; ++i) {
      Eigen::VectorXd v = fit.mode;
      for (auto& a : v) a += jitter(rng);
      worst_joint = std::max(worst_joint, grad_check(post, v, 1e-5));
    }
    double worst_b = 0.0;
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> up(1e-4, 0.3);
    for (int i = 0; i < 100; ++i) {
      const TransformedParams t{n01(rng), n01(rng), n01(rng)};
      const double p = up(rng);
      const Eigen::Vector3d b = null_posterior_gradient(p, t);
      for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e[k] = 1e-5;
        const double fd = (null_posterior(p, TransformedParams::from(t.vec() + e)) -
                           null_posterior(p, TransformedParams::from(t.vec() - e))) / 2e-5;
        worst_b = std::max(worst_b, std::abs(fd - b[k]) / std::max(std::abs(b[k]), 1e-8));
      }
    }
    report(5, worst_joint <= 1e-5 && worst_b <= 1e-5,
           "joint gradient max rel error " + num(worst_joint) + " at 20 points, delta-method " +
               num(worst_b) + " at 100 points (<= 1e-5)");
  }

  // 6: Gaussian approximation against MCMC
  {
    const Dataset ds = strong_small(2000, 1);
    const ModelFit fit = fit_joint(ds, quantile_bins(ds, 5, std::nullopt, 50));
    McmcOptions mo;
    mo.seed = 1;
    const McmcResult mc = mcmc_sample(ds, fit, mo);
    bool ok = mc.diagnostics_ok;
    double worst_margin = -INFINITY;
    for (std::size_t j = 0; j < 5; ++j) {
      const double diff = std::abs(fit.mode[3 * j] - mc.mean[3 * j]);
      const double tol = std::max(0.05, 3.0 * mc.mcse[3 * j]);
      ok = ok && diff <= tol;
      worst_margin = std::max(worst_margin, diff - tol);
    }
    report(6, ok, "max (|mode - mcmc mean| - tolerance) over pi0 chain = " + num(worst_margin) +
                      ", acceptance " + num(mc.acceptance_rate));
  }

  // 7: density audit
  {
    const double audit = normalization_audit(100, 7);
    bool shape_ok = true;
    for (std::size_t i = 0; i < 100; ++i) {
      const BinParams bp = random_bin_params(7, i);
      std::vector<double> f(1001);
      for (int k = 0; k <= 1000; ++k) f[k] = mix_density(0.0005 + 0.999 * k / 1000.0, bp);
      for (int k = 1; k <= 1000; ++k) shape_ok = shape_ok && f[k] <= f[k - 1] * (1 + 1e-12);
      for (int k = 1; k < 1000; ++k)
        shape_ok = shape_ok && f[k - 1] - 2 * f[k] + f[k + 1] >= -1e-9 * std::max(1.0, f[k]);
    }
    report(7, audit <= 1e-6 && shape_ok,
           "worst |integral - 1| = " + num(audit) + " over 100 triples, shape " +
               (shape_ok ? "nonincreasing and convex" : "violated"));
  }

  // 8: structure
  {
    const Dataset ds = strong_small(3000, 8);
    const ModelFit fit = fit_joint(ds, quantile_bins(ds, 6, std::nullopt, 50));
    const LogPosterior post = posterior_of(ds, fit);
    double worst = 0.0;
    bool zeros = true;
    std::mt19937_64 rng(88);
    std::normal_distribution<double> jitter(0.0, 0.5);
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd v = fit.mode;
      for (auto& a : v) a += jitter(rng);
      const Eigen::MatrixXd band = post.evaluate(v).neg_hessian.to_dense();
      const Eigen::MatrixXd dense = -dense_log_posterior_hessian(post, v);
      worst = std::max(worst, (band - dense).cwiseAbs().maxCoeff() /
                                  std::max(1.0, dense.cwiseAbs().maxCoeff()));
      for (Eigen::Index i = 0; i < band.rows(); ++i)
        for (Eigen::Index j = 0; j < band.cols(); ++j)
          if (std::abs(i - j) > 3) zeros = zeros && band(i, j) == 0.0 && dense(i, j) == 0.0;
    }
    const ModelFit joint1 = fit_joint(ds, quantile_bins(ds, 1, std::nullopt, 1));
    const OneBinSummary ob = fit_one_bin(ds);
    const double d1 = (joint1.mode - ob.fit.mode).cwiseAbs().maxCoeff();
    report(8, worst <= 1e-12 && zeros && d1 <= 1e-8,
           "banded vs dense max rel diff " + num(worst) + ", out-of-band zeros " +
               (zeros ? "exact" : "violated") + ", B=1 vs one-bin " + num(d1));
  }

  // 9: posterior contracts
  {
    const Dataset ds = strong_small(5000, 9);
    const ModelFit fit = fit_joint(ds, quantile_bins(ds, 10, std::nullopt, 50));
    bool range_ok = true, mono_ok = true;
    double top_gap = 0.0;
    for (std::size_t j = 0; j < fit.num_bins(); ++j) {
      double prev = 0.0;
      for (int k = 0; k <= 2000; ++k) {
        const double p = std::pow(10.0, -12.0 + 12.0 * k / 2000.0) * (1 - 1e-12);
        const double v = posterior_prob(p, j, fit).prob;
        range_ok = range_ok && v > 0.0 && v <= 1.0;
        mono_ok = mono_ok && v >= prev;
        prev = v;
      }
      top_gap = std::max(top_gap, std::abs(posterior_prob(1 - 1e-12, j, fit).prob - 1.0));
    }
    report(9, range_ok && mono_ok && top_gap <= 1e-9,
           std::string("prob in (0,1] ") + (range_ok ? "yes" : "no") + ", nondecreasing " +
               (mono_ok ? "yes" : "no") + ", max |prob(1-1e-12) - 1| = " + num(top_gap));
  }

  // 10: lambda formula
  {
    const std::vector<TransformedParams> init = {{0, 0, 0}, {1, 1, 1}, {3, 3, 3}};
    const SmoothingParams s = estimate_lambdas(init, 1.0);
    const SmoothingParams s7 = estimate_lambdas(init, 7.0);
    bool ok = true;
    for (int k = 0; k < 3; ++k) ok = ok && s.lambda[k] == 0.6 && s7.lambda[k] == 7.0 * 3.0 / 5.0;
    report(10, ok, "hand example lambda = " + num(s.lambda[0]) + ", c = 7 gives " + num(s7.lambda[0]));
  }

  // 11: one-bin conservativeness on the weak studies
  {
    std::string detail;
    const bool ok = conservative(s1, 0.5, detail) & conservative(s2, 0.9, detail);
    report(11, ok, detail);
  }

  // 12: determinism of every subcommand through the executable
  {
    const fs::path root = fs::temp_directory_path() / "covmod_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string d = root.string();
    const std::vector<std::tuple<std::string, std::string, std::string>> steps = {
        {"simulate", "sim", "simulate --pibar0 0.5 --pi0-at-0 0.9 --pi0-at-1 0.1 --m 3000 --bins 6 "
                     "--replicates 3 --seed 4 --output-dir \"" + d + "/sim\""},
        {"fit", "fit", "fit --input \"" + d + "/sim/sim_data.csv\" --bins 6 --output-dir \"" + d + "/fit\""},
        {"score", "score", "score --input \"" + d + "/sim/sim_data.csv\" --fit \"" + d +
                      "/fit/fit.json\" --output-dir \"" + d + "/score\""},
        {"plotdata", "plot", "plotdata --fit \"" + d + "/fit/fit.json\" --scores \"" + d +
                         "/score/scores.csv\" --output-dir \"" + d + "/plot\""},
        {"validate", "val", "validate --mcmc-iterations 20000 --burn-in 4000 --output-dir \"" + d + "/val\""},
    };
    bool ok = true;
    std::string detail;
    for (const auto& [name, sub, args] : steps) {
      const fs::path dir = root / sub;
      const fs::path so = root / (name + ".stdout");
      const int c1 = run_exe(args, so);
      const std::string first = fs::exists(dir) ? snapshot(dir, so) : read_file(so);
      const int c2 = run_exe(args, so);
      const std::string second = fs::exists(dir) ? snapshot(dir, so) : read_file(so);
      const bool same = c1 == 0 && c2 == 0 && first == second;
      ok = ok && same;
      detail += name + (same ? " identical; " : " DIFFERS or failed; ");
    }
    report(12, ok, detail);
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "acceptance: " << (12 - failures) << "/12 passed in " << num(secs) << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
