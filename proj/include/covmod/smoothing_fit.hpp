#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "covmod/banded.hpp"
#include "covmod/binning.hpp"
#include "covmod/ingest.hpp"
#include "covmod/mixture.hpp"

namespace covmod {

inline constexpr double kLambdaCap = 1e6;
inline constexpr double kDefaultRidge = 1e-6;
inline constexpr double kMaxRidge = 1e-2;
// Parameters are laid out bin-major, so same-type parameters of adjacent
// bins sit 3 apart.
inline constexpr std::size_t kHalfBandwidth = 3;

// Random-walk precisions for the (pi0_t, xi_t, theta_t) chains, already
// multiplied by the scaling factor c.
struct SmoothingParams {
  std::array<double, 3> lambda{0.0, 0.0, 0.0};
  double c = 1.0;
};

// lambda_k = c * B / sum_j (t_{j,k} - t_{j-1,k})^2, capped at kLambdaCap.
// Throws ConfigError for B < 2.
SmoothingParams estimate_lambdas(std::span<const TransformedParams> initial, double c);

struct BinFitOptions {
  int max_iterations = 100;
  int max_halvings = 30;
  double grad_tol = 1e-8;
  double rel_tol = 1e-12;
};

struct BinFitResult {
  TransformedParams params;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline constexpr TransformedParams kDefaultStart{1.0, 0.0, 0.0};

// Newton-Raphson on one bin's log-likelihood with step halving. When the
// negative Hessian is not positive definite it is shifted by a multiple of
// the identity until it is.
BinFitResult fit_bin_initial(const PValueBin& bin,
                             std::optional<TransformedParams> warm_start = std::nullopt,
                             const BinFitOptions& options = {});
BinFitResult fit_bin_initial(std::span<const double> pvec,
                             std::optional<TransformedParams> warm_start = std::nullopt,
                             const BinFitOptions& options = {});

// Joint log posterior over the 3B-vector: bin log-likelihoods, the three
// first-order random-walk priors and a ridge (ridge/2)|v - anchor|^2.
class LogPosterior {
 public:
  LogPosterior(std::vector<PValueBin> bins, SmoothingParams lambdas, double ridge,
               Eigen::VectorXd anchor);

  std::size_t num_bins() const { return bins_.size(); }
  std::size_t dim() const { return 3 * bins_.size(); }
  const std::vector<PValueBin>& bins() const { return bins_; }
  const SmoothingParams& lambdas() const { return lambdas_; }
  double ridge() const { return ridge_; }
  void set_ridge(double ridge) { ridge_ = ridge; }
  const Eigen::VectorXd& anchor() const { return anchor_; }

  double value(const Eigen::VectorXd& v) const;
  double prior_value(const Eigen::VectorXd& v) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& v) const;

  struct Evaluation {
    double value = 0.0;
    Eigen::VectorXd gradient;
    BandedSymmetricMatrix neg_hessian;  // -Hessian, ridge included
  };
  Evaluation evaluate(const Eigen::VectorXd& v) const;

 private:
  std::vector<PValueBin> bins_;
  SmoothingParams lambdas_;
  double ridge_;
  Eigen::VectorXd anchor_;
};

struct FitOptions {
  double c = 1.0;
  double ridge = kDefaultRidge;
  double max_ridge = kMaxRidge;
  int max_iterations = 100;
  int max_halvings = 30;
  double grad_tol = 1e-8;
  double rel_tol = 1e-12;
  BinFitOptions initial{};
};

struct ModelFit {
  BinLayout layout;
  Eigen::VectorXd mode;     // 3B, bin-major transformed parameters
  Eigen::VectorXd initial;  // stage-one values, also the ridge anchor
  BandedSymmetricMatrix precision;
  std::vector<Eigen::Matrix3d> covariance_blocks;
  SmoothingParams lambdas;
  double ridge = kDefaultRidge;
  double log_post_at_mode = 0.0;
  double gradient_norm = 0.0;  // infinity norm at the mode
  int iterations = 0;
  bool converged = false;
  std::vector<bool> initial_converged;
  std::vector<double> trace;  // log posterior after each accepted step

  std::size_t num_bins() const { return layout.bins; }
  TransformedParams transformed(std::size_t bin) const;
  BinParams natural(std::size_t bin) const;
};

// Sequential warm-started per-bin fits, lambda estimation, then joint
// Newton-Raphson with banded Cholesky solves. Throws NumericalError when the
// negative Hessian stays indefinite after ridge escalation.
ModelFit fit_joint(const Dataset& ds, const BinLayout& layout, const FitOptions& options = {});
ModelFit fit_joint(const std::vector<std::vector<double>>& bin_pvalues,
                   const BinLayout& layout, const FitOptions& options = {});

struct Marginal {
  double mean = 0.0;
  double sd = 0.0;
};

// Gaussian marginal of one transformed parameter. Throws InputError for an
// out-of-range bin.
Marginal marginal(const ModelFit& fit, std::size_t bin, ParamKind which);

double sum_squared_differences(const Eigen::VectorXd& v, ParamKind which);

}  // namespace covmod
