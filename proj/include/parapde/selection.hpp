#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "parapde/ard.hpp"
#include "parapde/best_subset.hpp"
#include "parapde/spectral.hpp"

namespace parapde {

inline constexpr double kZeta = 1e-5;

/// Scores of one support size under one representation.
struct CriterionScore {
  std::size_t support_size = 0;
  double complexity = 0.0;  // s_k, or s_k * |{S^i}| in free mode
  double rss = 0.0;
  std::size_t n_samples = 0;
  double aic = 0.0;
  double aicc = 0.0;
  bool aicc_undefined = false;  // N - s_k - 1 <= 0; aicc is +inf
  double bic = 0.0;
  double ubic = 0.0;
  double uncertainty = 0.0;  // 10^lambda * V_bar
  double V = 0.0;
  double V_bar = 0.0;
  TransformId transform_id = TransformId::PsdIntegrated;
};

/// AIC, AICc, BIC and UBIC from one residual sum of squares. All share the
/// likelihood term N log(2 pi rss / N + zeta).
CriterionScore information_criteria(double rss, std::size_t n_samples, double complexity,
                                    double uncertainty);

/// Model profiles Q^i xi^i of a solution over every step of `library`.
std::vector<Eigen::VectorXd> model_profiles(const SubsetSolution& solution, const CandidateLibrary& library);

/// Scores every size on the path. For PsdIntegrated the RSS is taken between
/// the integrated-PSD series of target and model (N = n_steps); for Identity
/// it runs over all entries (N = n_steps * n_samples). `uncertainty` may be
/// empty, in which case the uncertainty term is zero.
std::vector<CriterionScore> criterion_scores(const SubsetPath& path,
                                             std::span<const UncertaintyReport> uncertainty,
                                             const CandidateLibrary& library, TransformId transform,
                                             double lambda);

struct MannWhitneyResult {
  double p_value = 0.5;
  double u_statistic = 0.0;
  bool exact = false;
  bool all_tied = false;
};

/// One-sided Mann-Whitney U test of "a is stochastically less than b". Exact
/// permutation distribution when both samples have at most 10 entries,
/// otherwise the tie- and continuity-corrected normal approximation.
MannWhitneyResult mann_whitney_less(std::span<const double> a, std::span<const double> b);

/// Per-step BIC of every size, computed between the one-sided PSDs of each
/// step's target and model profiles (N = PSD length).
Eigen::MatrixXd per_step_bic(const SubsetPath& path, const CandidateLibrary& library);

struct FilterReport {
  std::vector<std::size_t> sizes;
  Eigen::MatrixXd per_step_bic;            // sizes x steps
  std::vector<double> global_bic;          // per size
  std::vector<double> consecutive_p;       // p(k+1 vs k)
  std::vector<double> reference_p;         // p(k vs k'), NaN for the first size
  std::vector<std::size_t> reference_size; // k' per size (the size itself for the first)
  double p_cut = 0.01;
  std::vector<std::size_t> significant_sizes;
};

/// Support-size filter: size k is admitted when its global BIC beats the best
/// smaller size k' and its per-step BICs are significantly lower (p <= p_cut).
/// The smallest size is always admitted.
FilterReport filter_support_sizes(std::span<const std::size_t> sizes, std::span<const double> global_bic,
                                  const Eigen::MatrixXd& per_step_bic);

std::vector<double> default_lambda_grid();

struct LambdaSelection {
  double lambda_star = 0.0;
  std::size_t selected_size = 0;
  bool unstable = false;  // stability reached only at the last grid value
  std::vector<std::size_t> argmin_per_lambda;
};

/// Chooses lambda* as the smallest grid value from which the UBIC argmin over
/// the significant sizes no longer changes.
LambdaSelection tune_lambda_star(std::span<const std::size_t> sizes, std::span<const double> bic,
                                 std::span<const double> v_bar, std::size_t n_samples,
                                 std::span<const std::size_t> significant_sizes,
                                 std::span<const double> lambda_grid);

struct ConfidenceBand {
  std::size_t step = 0;
  std::size_t term = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct SelectionReport {
  std::vector<CriterionScore> scores;        // PSD transform, at lambda*
  std::vector<CriterionScore> identity_scores;
  FilterReport filter;
  LambdaSelection lambda;
  std::size_t selected_size = 0;
  std::size_t selected_index = 0;            // into path.solutions
  std::vector<ConfidenceBand> bands;         // mean +/- 2 std per step and term
};

/// Filter, tune lambda*, pick s*, attach confidence bands of the chosen model.
/// `transform` selects the representation of the global BIC/UBIC; the
/// per-step filter statistics are always PSD based.
SelectionReport select_model(const SubsetPath& path, std::span<const UncertaintyReport> uncertainty,
                             const CandidateLibrary& library,
                             std::span<const double> lambda_grid = default_lambda_grid(),
                             TransformId transform = TransformId::PsdIntegrated);

}  // namespace parapde
