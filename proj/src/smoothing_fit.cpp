#include "covmod/smoothing_fit.hpp"

#include <algorithm>
#include <cmath>

#include "covmod/errors.hpp"
#include "covmod/text_io.hpp"

namespace covmod {

namespace {

double inf_norm(const Eigen::VectorXd& g) {
  return g.size() == 0 ? 0.0 : g.cwiseAbs().maxCoeff();
}

bool relative_change_small(double before, double after, double rel_tol) {
  return std::abs(after - before) <= rel_tol * std::max(std::abs(before), 1.0);
}

}  // namespace

SmoothingParams estimate_lambdas(std::span<const TransformedParams> initial, double c) {
  const std::size_t b = initial.size();
  if (b < 2) throw ConfigError("smoothing parameters need at least 2 bins");
  if (!(c > 0.0) || !std::isfinite(c))
    throw ConfigError("smoothing scale c must be positive, got " + format_double(c));
  SmoothingParams out;
  out.c = c;
  for (int k = 0; k < 3; ++k) {
    double ss = 0.0;
    for (std::size_t j = 1; j < b; ++j) {
      const double d = initial[j].vec()[k] - initial[j - 1].vec()[k];
      ss += d * d;
    }
    const double lambda = ss > 0.0 ? c * static_cast<double>(b) / ss : kLambdaCap;
    out.lambda[k] = std::min(lambda, kLambdaCap);
  }
  return out;
}

BinFitResult fit_bin_initial(const PValueBin& bin, std::optional<TransformedParams> warm_start,
                             const BinFitOptions& options) {
  if (bin.empty()) throw InputError("cannot fit an empty bin");
  BinFitResult res;
  TransformedParams t = warm_start.value_or(kDefaultStart);
  BinDerivatives d = bin_grad_hess(bin, t);
  if (!std::isfinite(d.value) && warm_start) {
    t = kDefaultStart;
    d = bin_grad_hess(bin, t);
  }
  if (!std::isfinite(d.value))
    throw NumericalError("bin log-likelihood is not finite at the starting point");

  int small_changes = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    if (d.gradient.cwiseAbs().maxCoeff() <= options.grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::Matrix3d neg_h = -d.hessian;
    Eigen::LLT<Eigen::Matrix3d> llt(neg_h);
    double shift = 0.0;
    const double scale = std::max(1.0, neg_h.diagonal().cwiseAbs().maxCoeff());
    while (llt.info() != Eigen::Success) {
      shift = shift == 0.0 ? 1e-8 * scale : shift * 10.0;
      llt.compute(neg_h + shift * Eigen::Matrix3d::Identity());
      if (shift > 1e12 * scale) break;
    }
    if (llt.info() != Eigen::Success) break;
    const Eigen::Vector3d step = llt.solve(d.gradient);
    // predicted gain of the Newton step; once this is below the relative
    // tolerance the remaining change is roundoff
    const bool at_noise = shift == 0.0 &&
        0.5 * d.gradient.dot(step) <= options.rel_tol * std::max(std::abs(d.value), 1.0);

    double factor = 1.0;
    bool accepted = false;
    bool full_step = true;
    TransformedParams cand;
    if (at_noise) {
      cand = TransformedParams::from(t.vec() + step);
      const double ll = bin_log_likelihood(bin, cand);
      const double noise = options.rel_tol * std::max(std::abs(d.value), 1.0);
      if (std::isfinite(ll) && ll >= d.value - noise &&
          bin_grad_hess(bin, cand).gradient.cwiseAbs().maxCoeff() <
              d.gradient.cwiseAbs().maxCoeff())
        accepted = true;
    }
    for (int h = 0; !accepted && h <= options.max_halvings; ++h) {
      cand = TransformedParams::from(t.vec() + factor * step);
      const double ll = bin_log_likelihood(bin, cand);
      if (std::isfinite(ll) && ll >= d.value) {
        accepted = true;
        full_step = (h == 0);
        break;
      }
      factor *= 0.5;
    }
    if (!accepted) {
      res.converged = res.converged || at_noise;
      break;
    }

    const double before = d.value;
    d = bin_grad_hess(bin, cand);
    t = cand;
    res.iterations = it + 1;
    if (((full_step && shift == 0.0) || at_noise) &&
        relative_change_small(before, d.value, options.rel_tol)) {
      // a couple of polishing steps usually bring the gradient under grad_tol
      res.converged = true;
      if (++small_changes >= 3) break;
    }
  }
  res.params = t;
  res.log_likelihood = d.value;
  return res;
}

BinFitResult fit_bin_initial(std::span<const double> pvec,
                             std::optional<TransformedParams> warm_start,
                             const BinFitOptions& options) {
  return fit_bin_initial(PValueBin(pvec), warm_start, options);
}

LogPosterior::LogPosterior(std::vector<PValueBin> bins, SmoothingParams lambdas,
                           double ridge, Eigen::VectorXd anchor)
    : bins_(std::move(bins)), lambdas_(lambdas), ridge_(ridge), anchor_(std::move(anchor)) {
  if (static_cast<std::size_t>(anchor_.size()) != dim())
    throw InputError("ridge anchor length does not match 3 x number of bins");
}

double LogPosterior::prior_value(const Eigen::VectorXd& v) const {
  double out = 0.0;
  const std::size_t b = num_bins();
  for (std::size_t k = 0; k < 3; ++k) {
    double ss = 0.0;
    for (std::size_t j = 1; j < b; ++j) {
      const double d = v[3 * j + k] - v[3 * (j - 1) + k];
      ss += d * d;
    }
    out -= 0.5 * lambdas_.lambda[k] * ss;
  }
  return out;
}

double LogPosterior::value(const Eigen::VectorXd& v) const {
  double out = 0.0;
  for (std::size_t j = 0; j < num_bins(); ++j)
    out += bin_log_likelihood(bins_[j], TransformedParams::from(v.segment<3>(3 * j)));
  out += prior_value(v);
  out -= 0.5 * ridge_ * (v - anchor_).squaredNorm();
  return out;
}

Eigen::VectorXd LogPosterior::gradient(const Eigen::VectorXd& v) const {
  return evaluate(v).gradient;
}

LogPosterior::Evaluation LogPosterior::evaluate(const Eigen::VectorXd& v) const {
  const std::size_t b = num_bins();
  const std::size_t n = dim();
  Evaluation e;
  e.gradient = Eigen::VectorXd::Zero(n);
  e.neg_hessian = BandedSymmetricMatrix(n, kHalfBandwidth);

  for (std::size_t j = 0; j < b; ++j) {
    const auto d = bin_grad_hess(bins_[j], TransformedParams::from(v.segment<3>(3 * j)));
    e.value += d.value;
    e.gradient.segment<3>(3 * j) += d.gradient;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c <= r; ++c) e.neg_hessian.at(3 * j + r, 3 * j + c) -= d.hessian(r, c);
  }

  for (std::size_t k = 0; k < 3; ++k) {
    const double lambda = lambdas_.lambda[k];
    for (std::size_t j = 1; j < b; ++j) {
      const std::size_t hi = 3 * j + k;
      const std::size_t lo = 3 * (j - 1) + k;
      const double diff = v[hi] - v[lo];
      e.value -= 0.5 * lambda * diff * diff;
      e.gradient[hi] -= lambda * diff;
      e.gradient[lo] += lambda * diff;
      e.neg_hessian.at(hi, hi) += lambda;
      e.neg_hessian.at(lo, lo) += lambda;
      e.neg_hessian.at(hi, lo) -= lambda;
    }
  }

  const Eigen::VectorXd off = v - anchor_;
  e.value -= 0.5 * ridge_ * off.squaredNorm();
  e.gradient -= ridge_ * off;
  e.neg_hessian.add_to_diagonal(ridge_);
  return e;
}

TransformedParams ModelFit::transformed(std::size_t bin) const {
  return TransformedParams::from(mode.segment<3>(3 * bin));
}

BinParams ModelFit::natural(std::size_t bin) const { return to_natural(transformed(bin)); }

ModelFit fit_joint(const Dataset& ds, const BinLayout& layout, const FitOptions& options) {
  if (layout.assignment.size() != ds.size())
    throw InputError("layout was built for a different dataset");
  return fit_joint(split_by_bin(ds, layout), layout, options);
}

ModelFit fit_joint(const std::vector<std::vector<double>>& bin_pvalues,
                   const BinLayout& layout, const FitOptions& options) {
  const std::size_t b = layout.bins;
  if (bin_pvalues.size() != b) throw InputError("per-bin data does not match the layout");
  if (!(options.c > 0.0)) throw ConfigError("smoothing scale c must be positive");

  ModelFit fit;
  fit.layout = layout;

  // Stage one: per-bin maximum likelihood, each bin warm-started from the
  // previous one.
  std::vector<PValueBin> bins;
  bins.reserve(b);
  std::vector<TransformedParams> initial;
  initial.reserve(b);
  std::optional<TransformedParams> warm;
  for (std::size_t j = 0; j < b; ++j) {
    bins.emplace_back(bin_pvalues[j]);
    auto r = fit_bin_initial(bins.back(), warm, options.initial);
    if (warm) {
      // a warm start sitting on a flat boundary ridge can trap later bins,
      // so the default start is also tried and the better maximum kept
      auto cold = fit_bin_initial(bins.back(), std::nullopt, options.initial);
      if (cold.log_likelihood > r.log_likelihood) r = cold;
    }
    initial.push_back(r.params);
    fit.initial_converged.push_back(r.converged);
    warm = r.params;
  }
  fit.initial = Eigen::VectorXd(3 * b);
  for (std::size_t j = 0; j < b; ++j) fit.initial.segment<3>(3 * j) = initial[j].vec();

  if (b >= 2) {
    fit.lambdas = estimate_lambdas(initial, options.c);
  } else {
    fit.lambdas.c = options.c;
  }

  // Stage two: joint Newton-Raphson from the stage-one values.
  double ridge = options.ridge;
  LogPosterior post(std::move(bins), fit.lambdas, ridge, fit.initial);
  Eigen::VectorXd v = fit.initial;
  auto ev = post.evaluate(v);
  fit.trace.push_back(ev.value);

  auto factor_with_escalation = [&]() {
    auto chol = BandedCholesky::factor(ev.neg_hessian);
    while (!chol && ridge * 10.0 <= options.max_ridge * (1.0 + 1e-12)) {
      ridge *= 10.0;
      post.set_ridge(ridge);
      ev = post.evaluate(v);
      fit.trace.assign(1, ev.value);
      chol = BandedCholesky::factor(ev.neg_hessian);
    }
    return chol;
  };
  auto indefinite_error = [&]() {
    return NumericalError("negative Hessian is not positive definite after ridge escalation to " +
                          format_double(options.max_ridge) + " (iteration " +
                          std::to_string(fit.iterations) + ", log posterior " +
                          format_double(ev.value) + ")");
  };
  // Away from the mode the Hessian may be indefinite even with the largest
  // ridge; the step direction then comes from a shifted matrix while the
  // objective stays unchanged.
  auto shifted_factor = [&]() {
    double scale = 1.0;
    for (std::size_t i = 0; i < ev.neg_hessian.size(); ++i)
      scale = std::max(scale, std::abs(ev.neg_hessian(i, i)));
    for (double shift = 1e-8 * scale; shift <= 1e8 * scale; shift *= 10.0) {
      BandedSymmetricMatrix m = ev.neg_hessian;
      m.add_to_diagonal(shift);
      if (auto chol = BandedCholesky::factor(m)) return *chol;
    }
    throw indefinite_error();
  };

  int small_changes = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    if (inf_norm(ev.gradient) <= options.grad_tol) {
      fit.converged = true;
      break;
    }
    auto exact = factor_with_escalation();
    const bool shifted = !exact;
    const BandedCholesky chol = exact ? *exact : shifted_factor();
    const Eigen::VectorXd step = chol.solve(ev.gradient);
    const double gain = 0.5 * ev.gradient.dot(step);
    const bool at_noise =
        !shifted && gain <= options.rel_tol * std::max(std::abs(ev.value), 1.0);

    double factor = 1.0;
    bool accepted = false;
    bool full_step = true;
    Eigen::VectorXd cand;
    if (at_noise) {
      // value differences are below roundoff here, so the full step is judged
      // by the gradient instead
      cand = v + step;
      const double val = post.value(cand);
      const double noise = options.rel_tol * std::max(std::abs(ev.value), 1.0);
      if (std::isfinite(val) && val >= ev.value - noise &&
          inf_norm(post.gradient(cand)) < inf_norm(ev.gradient))
        accepted = true;
    }
    for (int h = 0; !accepted && h <= options.max_halvings; ++h) {
      cand = v + factor * step;
      const double val = post.value(cand);
      if (std::isfinite(val) && val >= ev.value) {
        accepted = true;
        full_step = (h == 0);
        break;
      }
      factor *= 0.5;
    }
    if (!accepted) {
      fit.converged = fit.converged || at_noise;
      break;
    }

    const double before = ev.value;
    const double grad_before = inf_norm(ev.gradient);
    v = cand;
    ev = post.evaluate(v);
    fit.trace.push_back(ev.value);
    fit.iterations = it + 1;
    if (((full_step && !shifted) || at_noise) && relative_change_small(before, ev.value, options.rel_tol)) {
      // keep polishing while Newton still shrinks the gradient
      fit.converged = true;
      if (++small_changes >= 10 || inf_norm(ev.gradient) > 0.5 * grad_before) break;
    }
  }
  if (!fit.converged && inf_norm(ev.gradient) <= options.grad_tol) fit.converged = true;

  const auto final_chol = factor_with_escalation();
  if (!final_chol) throw indefinite_error();
  const BandedCholesky& chol = *final_chol;
  fit.mode = v;
  fit.ridge = ridge;
  fit.log_post_at_mode = ev.value;
  fit.gradient_norm = inf_norm(ev.gradient);
  fit.precision = ev.neg_hessian;
  fit.lambdas = post.lambdas();

  fit.covariance_blocks.reserve(b);
  for (std::size_t j = 0; j < b; ++j) {
    Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(3 * b, 3);
    for (int r = 0; r < 3; ++r) unit(3 * j + r, r) = 1.0;
    const Eigen::MatrixXd cols = chol.solve(unit);
    Eigen::Matrix3d block = cols.block<3, 3>(3 * j, 0);
    fit.covariance_blocks.push_back(0.5 * (block + block.transpose()));
  }
  return fit;
}

Marginal marginal(const ModelFit& fit, std::size_t bin, ParamKind which) {
  if (bin >= fit.num_bins())
    throw InputError("bin index " + std::to_string(bin + 1) + " is out of range 1.." +
                     std::to_string(fit.num_bins()));
  const auto k = static_cast<Eigen::Index>(which);
  return {fit.mode[3 * bin + k], std::sqrt(fit.covariance_blocks[bin](k, k))};
}

double sum_squared_differences(const Eigen::VectorXd& v, ParamKind which) {
  const auto k = static_cast<Eigen::Index>(which);
  double ss = 0.0;
  for (Eigen::Index j = 1; 3 * j < v.size(); ++j) {
    const double d = v[3 * j + k] - v[3 * (j - 1) + k];
    ss += d * d;
  }
  return ss;
}

}  // namespace covmod
