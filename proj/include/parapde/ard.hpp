#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "parapde/best_subset.hpp"

namespace parapde {

struct ArdOptions {
  int max_iter = 300;
  double tol = 1e-6;
  double alpha_cap = 1e10;
  // When set, every precision is pinned to this value and only the noise
  // precision is re-estimated.
  std::optional<double> fixed_alpha;
};

/// Posterior of Bayesian linear regression with one precision per coefficient.
struct ArdPosterior {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd alpha;
  double beta = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_evidence;  // after each iteration
};

/// Evidence maximisation by MacKay fixed-point updates. Coefficients are never
/// pruned; precisions are capped instead.
ArdPosterior ard_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                     const ArdOptions& options = {});

/// Log marginal likelihood of (alpha, beta) for the given data.
double ard_log_evidence(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                        const Eigen::VectorXd& alpha, double beta);

inline constexpr double kInstabilitySentinel = 1e6;

struct InstabilityRatio {
  double value = 0.0;
  bool sentinel = false;
};

/// Sum of posterior standard deviations over the L1 norm of `coefficients`
/// (the posterior mean unless another estimate is supplied).
InstabilityRatio instability_ratio(const ArdPosterior& posterior,
                                   const Eigen::VectorXd* coefficients = nullptr);

enum class RatioCoefficients { ArdMean, Ols };

struct UncertaintyOptions {
  ArdOptions ard;
  RatioCoefficients coefficients = RatioCoefficients::ArdMean;
  // Steps excluded from V at the low and high ends of the parameter axis.
  std::size_t trim_low = 0;
  std::size_t trim_high = 0;
};

struct UncertaintyReport {
  std::size_t support_size = 0;
  std::vector<double> per_step_ratios;
  std::vector<bool> sentinel_steps;
  double V = 0.0;
  double V_bar = 0.0;
  Eigen::MatrixXd posterior_mean;  // N_q x n_steps, zero off-support
  Eigen::MatrixXd posterior_std;   // N_q x n_steps, zero off-support
};

/// Per support size: ARD on each step's training design restricted to its
/// support, R_i summed into V, and V normalised by the path maximum.
std::vector<UncertaintyReport> accumulate_uncertainty(const SubsetPath& path,
                                                      const CandidateLibrary& train,
                                                      const UncertaintyOptions& options = {});

}  // namespace parapde
