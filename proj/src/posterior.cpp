#include "covmod/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "covmod/errors.hpp"
#include "covmod/text_io.hpp"

namespace covmod {

PosteriorProb posterior_prob(double p, std::size_t bin, const ModelFit& fit) {
  if (bin >= fit.num_bins()) throw InputError("bin index out of range");
  const TransformedParams t = fit.transformed(bin);
  const double a = null_posterior(p, t);
  const Eigen::Vector3d b = null_posterior_gradient(p, t);
  const double var = std::max(0.0, b.dot(fit.covariance_blocks[bin] * b));
  const double half = kZ95 * std::sqrt(var);

  PosteriorProb out;
  out.prob = std::clamp(a, std::numeric_limits<double>::min(), 1.0);
  out.ci_lo = std::min(std::clamp(a - half, 0.0, 1.0), out.prob);
  out.ci_hi = std::max(std::clamp(a + half, 0.0, 1.0), out.prob);
  return out;
}

namespace {

void assign_ranks(std::vector<PosteriorScore>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = scores[a];
    const auto& sb = scores[b];
    if (sa.prob != sb.prob) return sa.prob < sb.prob;
    if (sa.p != sb.p) return sa.p < sb.p;
    return sa.id < sb.id;
  });
  for (std::size_t r = 0; r < order.size(); ++r) scores[order[r]].rank = r + 1;
}

}  // namespace

std::vector<PosteriorScore> score_all(const Dataset& ds, const ModelFit& fit) {
  std::vector<PosteriorScore> out;
  out.reserve(ds.size());
  for (const auto& rec : ds) {
    PosteriorScore s;
    s.id = rec.id;
    s.p = rec.p;
    s.x = rec.x;
    s.bin = assign_bin(rec.x, fit.layout);
    if (s.bin >= fit.num_bins() || fit.covariance_blocks.size() != fit.num_bins())
      throw NumericalError("record '" + rec.id + "' falls in a bin with no fitted parameters");
    const auto pp = posterior_prob(rec.p, s.bin, fit);
    s.prob = pp.prob;
    s.ci_lo = pp.ci_lo;
    s.ci_hi = pp.ci_hi;
    out.push_back(std::move(s));
  }
  assign_ranks(out);
  return out;
}

OneBinSummary fit_one_bin(const Dataset& ds, const FitOptions& options) {
  OneBinSummary out;
  const BinLayout layout = quantile_bins(ds, 1, std::nullopt, 1);
  out.fit = fit_joint(ds, layout, options);
  const Marginal m = marginal(out.fit, 0, ParamKind::pi0);
  out.pi0_hat = logistic(m.mean);
  out.pi0_lo = logistic(m.mean - kZ95 * m.sd);
  out.pi0_hi = logistic(m.mean + kZ95 * m.sd);
  return out;
}

StoreyEstimate storey_pi0(std::span<const double> pvec, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw ConfigError("Storey tuning value must lie in (0, 1), got " + format_double(lambda));
  if (pvec.empty()) throw InputError("Storey estimate needs at least one p-value");
  const auto above = std::count_if(pvec.begin(), pvec.end(), [&](double p) { return p > lambda; });
  StoreyEstimate out;
  out.degenerate = above == 0;
  out.pi0 = std::min(1.0, static_cast<double>(above) /
                              (static_cast<double>(pvec.size()) * (1.0 - lambda)));
  return out;
}

std::vector<bool> call_significant(std::span<const PosteriorScore> scores, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ConfigError("significance threshold must lie in [0, 1], got " + format_double(threshold));
  std::vector<bool> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(s.prob < threshold);
  return out;
}

CallCounts compare_calls(std::span<const PosteriorScore> covariate,
                         std::span<const PosteriorScore> baseline, double threshold) {
  if (covariate.size() != baseline.size())
    throw InputError("score sets differ in length");
  const auto a = call_significant(covariate, threshold);
  const auto b = call_significant(baseline, threshold);
  CallCounts c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (covariate[i].id != baseline[i].id)
      throw InputError("score sets disagree on the id at position " + std::to_string(i + 1));
    if (a[i] && b[i])
      ++c.both;
    else if (a[i])
      ++c.covariate_only;
    else if (b[i])
      ++c.baseline_only;
    else
      ++c.neither;
  }
  return c;
}

std::vector<RankPair> rank_compare(std::span<const PosteriorScore> covariate,
                                   std::span<const PosteriorScore> onebin) {
  if (covariate.size() != onebin.size())
    throw InputError("rank comparison needs score sets over the same ids");
  std::unordered_map<std::string, std::size_t> base_rank;
  base_rank.reserve(onebin.size());
  for (const auto& s : onebin) base_rank.emplace(s.id, s.rank);

  std::vector<RankPair> out;
  out.reserve(covariate.size());
  for (const auto& s : covariate) {
    auto it = base_rank.find(s.id);
    if (it == base_rank.end())
      throw InputError("id '" + s.id + "' is missing from the one-bin scores");
    out.push_back({s.id, s.rank, it->second,
                   static_cast<long>(it->second) - static_cast<long>(s.rank)});
  }
  std::sort(out.begin(), out.end(),
            [](const RankPair& a, const RankPair& b) { return a.rank_cov < b.rank_cov; });
  return out;
}

std::vector<double> threshold_curve(const ModelFit& fit, double threshold, NullDist null_dist) {
  std::vector<double> out;
  out.reserve(fit.num_bins());
  for (std::size_t j = 0; j < fit.num_bins(); ++j) {
    const TransformedParams t = fit.transformed(j);
    auto prob_at = [&](double z) { return null_posterior(clip_p(z_to_p(z, null_dist)), t); };
    double lo = 0.0;
    double hi = 10.0;
    if (prob_at(hi) > threshold) {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    if (prob_at(lo) <= threshold) {
      out.push_back(0.0);
      continue;
    }
    // prob is nonincreasing in z: keep prob(lo) > threshold >= prob(hi).
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (prob_at(mid) > threshold)
        lo = mid;
      else
        hi = mid;
    }
    out.push_back(hi);
  }
  return out;
}

}  // namespace covmod
