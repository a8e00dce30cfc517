#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "covmod/ingest.hpp"
#include "covmod/smoothing_fit.hpp"

namespace covmod {

inline constexpr double kDefaultThreshold = 0.05;
inline constexpr double kDefaultStoreyLambda = 0.5;
inline constexpr double kZ95 = 1.959963984540054;

struct PosteriorProb {
  double prob = 1.0;
  double ci_lo = 1.0;
  double ci_hi = 1.0;
};

// Covariate-modulated P(H0 | p, x) = pi0_j / f_j(p) at the mode, with a
// symmetric 95% delta-method interval clipped to [0, 1].
PosteriorProb posterior_prob(double p, std::size_t bin, const ModelFit& fit);

struct PosteriorScore {
  std::string id;
  double p = 0.5;
  double x = 0.0;
  std::size_t bin = 0;
  double prob = 1.0;
  double ci_lo = 1.0;
  double ci_hi = 1.0;
  std::size_t rank = 0;  // 1-based
};

// Scores every record in input order. Bins come from assign_bin against the
// fit's frozen layout. Ranks ascend by prob, then p, then id.
std::vector<PosteriorScore> score_all(const Dataset& ds, const ModelFit& fit);

struct OneBinSummary {
  ModelFit fit;
  double pi0_hat = 1.0;
  double pi0_lo = 1.0;
  double pi0_hi = 1.0;
};

// The no-covariate baseline: fit_joint on a single bin. The pi0 interval maps
// the pi0_t marginal's 95% bounds through the logistic.
OneBinSummary fit_one_bin(const Dataset& ds, const FitOptions& options = {});

struct StoreyEstimate {
  double pi0 = 1.0;
  bool degenerate = false;  // no p-value above the tuning value
};

// #{p > lambda} / (m (1 - lambda)), truncated at 1.
StoreyEstimate storey_pi0(std::span<const double> pvec,
                          double lambda = kDefaultStoreyLambda);

struct CallCounts {
  std::size_t both = 0;
  std::size_t covariate_only = 0;
  std::size_t baseline_only = 0;
  std::size_t neither = 0;
};

// flag = prob < threshold. Throws ConfigError for threshold outside [0, 1].
std::vector<bool> call_significant(std::span<const PosteriorScore> scores,
                                   double threshold = kDefaultThreshold);
// Scores are matched by position; both sets must describe the same records.
CallCounts compare_calls(std::span<const PosteriorScore> covariate,
                         std::span<const PosteriorScore> baseline,
                         double threshold = kDefaultThreshold);

struct RankPair {
  std::string id;
  std::size_t rank_cov = 0;
  std::size_t rank_onebin = 0;
  long displacement = 0;  // rank_onebin - rank_cov
};

// Joined on id, sorted by rank_cov. Throws InputError when the id sets differ.
std::vector<RankPair> rank_compare(std::span<const PosteriorScore> covariate,
                                   std::span<const PosteriorScore> onebin);

// Per bin, the z at which P(H0 | 1 - F0(z)) crosses `threshold`; +infinity if
// the bin never reaches it on [0, 10], 0 if it is already below at z = 0.
std::vector<double> threshold_curve(const ModelFit& fit, double threshold = kDefaultThreshold,
                                    NullDist null_dist = NullDist::standard_normal);

}  // namespace covmod
