#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "covmod/artifact.hpp"
#include "covmod/banded.hpp"
#include "covmod/errors.hpp"
#include "covmod/posterior.hpp"
#include "covmod/simulation.hpp"
#include "covmod/smoothing_fit.hpp"
#include "covmod/validation.hpp"

using namespace covmod;

namespace {

Dataset strong_data(std::size_t m, std::uint64_t seed) {
  SimConfig cfg;
  cfg.m = m;
  cfg.pibar0 = 0.5;
  cfg.pi0_at_0 = 0.9;
  cfg.pi0_at_1 = 0.1;
  cfg.seed = seed;
  return simulate(cfg).first;
}

// Dense oracle: block-diagonal likelihood Hessians plus lambda_k D^T D built
// from an explicit first-difference matrix.
Eigen::MatrixXd oracle_neg_hessian(const LogPosterior& post, const Eigen::VectorXd& v) {
  const std::size_t b = post.num_bins();
  const std::size_t n = 3 * b;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t j = 0; j < b; ++j)
    h.block<3, 3>(3 * j, 3 * j) =
        -bin_grad_hess(post.bins()[j], TransformedParams::from(v.segment<3>(3 * j))).hessian;
  for (std::size_t k = 0; k < 3; ++k) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(b - 1, n);
    for (std::size_t j = 1; j < b; ++j) {
      d(j - 1, 3 * j + k) = 1.0;
      d(j - 1, 3 * (j - 1) + k) = -1.0;
    }
    h += post.lambdas().lambda[k] * d.transpose() * d;
  }
  h += post.ridge() * Eigen::MatrixXd::Identity(n, n);
  return h;
}

LogPosterior posterior_for(const Dataset& ds, std::size_t bins, const Eigen::VectorXd& anchor) {
  const BinLayout layout = quantile_bins(ds, bins, std::nullopt, 1);
  std::vector<PValueBin> pb;
  for (const auto& p : split_by_bin(ds, layout)) pb.emplace_back(p);
  SmoothingParams lam;
  lam.lambda = {3.0, 11.0, 0.7};
  return LogPosterior(std::move(pb), lam, 1e-6, anchor);
}

}  // namespace

TEST_CASE("lambda estimate example, scaling and cap") {
  const std::vector<TransformedParams> init = {{0, 0, 0}, {1, 1, 1}, {3, 3, 3}};
  const SmoothingParams s = estimate_lambdas(init, 1.0);
  for (double l : s.lambda) CHECK(std::abs(l - 0.6) <= 1e-15);
  const SmoothingParams s2 = estimate_lambdas(init, 2.5);
  for (double l : s2.lambda) CHECK(std::abs(l - 1.5) <= 1e-15);
  CHECK(s2.c == 2.5);

  const std::vector<TransformedParams> flat = {{1, 2, 3}, {1, 2, 3}, {1, 2, 3 + 1e-9}};
  const SmoothingParams s3 = estimate_lambdas(flat, 1.0);
  CHECK(s3.lambda[0] == kLambdaCap);
  CHECK(s3.lambda[1] == kLambdaCap);
  CHECK(s3.lambda[2] == kLambdaCap);

  CHECK_THROWS_AS(estimate_lambdas(std::vector<TransformedParams>{{0, 0, 0}}, 1.0), ConfigError);
  CHECK_THROWS_AS(estimate_lambdas(init, 0.0), ConfigError);
}

TEST_CASE("banded Hessian matches the dense oracle") {
  const Dataset ds = strong_data(2000, 3);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (std::size_t bins : {2u, 3u, 7u}) {
    Eigen::VectorXd anchor(3 * bins);
    for (auto& a : anchor) a = n01(rng);
    const LogPosterior post = posterior_for(ds, bins, anchor);
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd v(3 * bins);
      for (auto& a : v) a = n01(rng);
      const auto ev = post.evaluate(v);
      const Eigen::MatrixXd band = ev.neg_hessian.to_dense();
      const Eigen::MatrixXd oracle = oracle_neg_hessian(post, v);
      const Eigen::MatrixXd helper = -dense_log_posterior_hessian(post, v);
      const double scale = std::max(1.0, oracle.cwiseAbs().maxCoeff());
      CHECK((band - oracle).cwiseAbs().maxCoeff() <= 1e-12 * scale);
      CHECK((helper - oracle).cwiseAbs().maxCoeff() <= 1e-12 * scale);
      for (Eigen::Index i = 0; i < band.rows(); ++i)
        for (Eigen::Index j = 0; j < band.cols(); ++j)
          if (std::abs(i - j) > static_cast<Eigen::Index>(kHalfBandwidth)) {
            CHECK(band(i, j) == 0.0);
            CHECK(oracle(i, j) == 0.0);
          }
      CHECK(std::abs(ev.value - post.value(v)) <= 1e-9 * std::max(1.0, std::abs(ev.value)));
    }
  }
}

TEST_CASE("joint gradient agrees with finite differences") {
  const Dataset ds = strong_data(2000, 4);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::VectorXd anchor = Eigen::VectorXd::Zero(12);
  const LogPosterior post = posterior_for(ds, 4, anchor);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd v(12);
    for (auto& a : v) a = n01(rng);
    const Eigen::VectorXd g = post.gradient(v);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(v.size());
      e[k] = 1e-5;
      const double fd = (post.value(v + e) - post.value(v - e)) / 2e-5;
      CHECK(std::abs(fd - g[k]) <= 1e-5 * std::max(1.0, std::abs(g[k])));
    }
  }
}

TEST_CASE("banded Cholesky solves and rejects indefinite input") {
  BandedSymmetricMatrix a(6, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    a.at(i, i) = 4.0;
    if (i >= 1) a.at(i, i - 1) = -1.0;
    if (i >= 2) a.at(i, i - 2) = 0.5;
  }
  const auto chol = BandedCholesky::factor(a);
  REQUIRE(chol);
  const Eigen::VectorXd rhs = Eigen::VectorXd::LinSpaced(6, 1.0, 6.0);
  const Eigen::VectorXd x = chol->solve(rhs);
  CHECK((a.to_dense() * x - rhs).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(std::abs(chol->log_determinant() - std::log(a.to_dense().determinant())) <= 1e-12);
  a.at(3, 3) = -1.0;
  CHECK_FALSE(BandedCholesky::factor(a));
}

TEST_CASE("joint fit converges with a nondecreasing trace") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset ds = strong_data(5000, seed);
    const BinLayout layout = quantile_bins(ds, 8, std::nullopt, 50);
    const ModelFit fit = fit_joint(ds, layout);
    CHECK(fit.converged);
    CHECK(fit.gradient_norm <= 1e-8);
    CHECK(fit.ridge == kDefaultRidge);
    REQUIRE(fit.trace.size() >= 1);
    for (std::size_t i = 1; i < fit.trace.size(); ++i)
      CHECK(fit.trace[i] >= fit.trace[i - 1] - 1e-12 * std::abs(fit.trace[i - 1]));
    CHECK(fit.log_post_at_mode == fit.trace.back());
    CHECK(fit.covariance_blocks.size() == 8);
    for (std::size_t b = 0; b < 8; ++b) {
      for (ParamKind k : {ParamKind::pi0, ParamKind::xi, ParamKind::theta}) {
        const Marginal mg = marginal(fit, b, k);
        CHECK(std::isfinite(mg.mean));
        CHECK(mg.sd > 0.0);
      }
    }
    // covariance blocks are the diagonal blocks of the inverse precision
    const Eigen::MatrixXd cov = fit.precision.to_dense().inverse();
    CHECK((cov.block<3, 3>(9, 9) - fit.covariance_blocks[3]).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK_THROWS_AS(marginal(fit, 8, ParamKind::pi0), InputError);
  }
}

TEST_CASE("one-bin joint fit equals the single-bin maximum") {
  const Dataset ds = strong_data(4000, 5);
  const BinLayout layout = quantile_bins(ds, 1, std::nullopt, 1);
  const ModelFit fit = fit_joint(ds, layout);
  const BinFitResult mle = fit_bin_initial(std::span<const double>(ds.p_values()));
  CHECK(mle.converged);
  CHECK((fit.mode - mle.params.vec()).cwiseAbs().maxCoeff() <= 1e-8);
  const OneBinSummary ob = fit_one_bin(ds);
  CHECK((ob.fit.mode - fit.mode).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(ob.pi0_lo <= ob.pi0_hat);
  CHECK(ob.pi0_hat <= ob.pi0_hi);
}

TEST_CASE("single-bin fit recovers generating parameters") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::gamma_distribution<double> ga(0.3, 1.0), gb(6.0, 1.0);
  std::vector<double> p(50000);
  for (auto& v : p) {
    if (u(rng) < 0.6) {
      v = u(rng);
    } else {
      const double a = ga(rng), b = gb(rng);
      v = a / (a + b);
    }
    v = std::clamp(v, 1e-12, 1 - 1e-12);
  }
  const BinFitResult r = fit_bin_initial(std::span<const double>(p));
  CHECK(r.converged);
  const BinParams est = to_natural(r.params);
  CHECK(std::abs(est.pi0 - 0.6) < 0.03);
  CHECK(std::abs(est.xi - 0.3) < 0.03);
}

TEST_CASE("unusable starting points") {
  const std::vector<double> p = {0.01, 0.2, 0.7, 0.03, 0.5};
  // a warm start outside the shape range falls back to the default start
  const BinFitResult r = fit_bin_initial(std::span<const double>(p), TransformedParams{0.0, 400.0, 0.0});
  CHECK(std::isfinite(r.log_likelihood));
  const std::vector<double> bad = {0.01, std::nan(""), 0.7};
  CHECK_THROWS_AS(fit_bin_initial(std::span<const double>(bad)), InputError);
  CHECK_THROWS_AS(fit_bin_initial(std::span<const double>()), InputError);
}

TEST_CASE("configured ridge is carried into the fit") {
  const Dataset ds = strong_data(3000, 6);
  const BinLayout layout = quantile_bins(ds, 4, std::nullopt, 50);
  FitOptions opt;
  opt.ridge = 1e-3;
  const ModelFit fit = fit_joint(ds, layout, opt);
  CHECK(fit.ridge >= 1e-3);
  CHECK(fit.converged);
  opt.c = -1.0;
  CHECK_THROWS_AS(fit_joint(ds, layout, opt), ConfigError);
}

TEST_CASE("larger smoothing scale flattens the fitted curve") {
  const Dataset ds = strong_data(6000, 7);
  const BinLayout layout = quantile_bins(ds, 10, std::nullopt, 50);
  FitOptions lo, hi;
  lo.c = 0.1;
  hi.c = 100.0;
  const ModelFit a = fit_joint(ds, layout, lo);
  const ModelFit b = fit_joint(ds, layout, hi);
  CHECK(sum_squared_differences(b.mode, ParamKind::xi) <= sum_squared_differences(a.mode, ParamKind::xi));
}

TEST_CASE("fit artifact round trip") {
  const Dataset ds = strong_data(3000, 8);
  FitArtifact art;
  art.settings.bins = 5;
  art.records = ds.size();
  art.fit = fit_joint(ds, quantile_bins(ds, 5, std::nullopt, 50));
  art.one_bin = fit_one_bin(ds);
  art.storey = storey_pi0(ds.p_values());
  const std::string text = serialize_fit_artifact(art);
  const FitArtifact back = parse_fit_artifact(text);
  CHECK(back.fit.mode == art.fit.mode);
  CHECK(back.fit.initial == art.fit.initial);
  CHECK(back.fit.precision.band_data() == art.fit.precision.band_data());
  for (std::size_t b = 0; b < 5; ++b) CHECK(back.fit.covariance_blocks[b] == art.fit.covariance_blocks[b]);
  CHECK(layout_hash(back.fit.layout) == layout_hash(art.fit.layout));
  CHECK(back.one_bin.pi0_hat == art.one_bin.pi0_hat);
  CHECK(back.storey.pi0 == art.storey.pi0);
  CHECK(serialize_fit_artifact(back) == text);

  std::string bad = text;
  const auto pos = bad.find("\"hash\": \"") + 9;
  bad[pos] = bad[pos] == '0' ? '1' : '0';
  CHECK_THROWS_AS(parse_fit_artifact(bad), ConfigError);
  CHECK_THROWS_AS(parse_fit_artifact("{not json"), ParseError);
}
