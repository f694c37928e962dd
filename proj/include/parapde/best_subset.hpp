#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "parapde/preprocessing.hpp"

namespace parapde {

using Support = std::vector<std::size_t>;  // sorted term indices

struct OlsFit {
  Eigen::VectorXd coefficients;  // one per support entry, in support order
  bool ridge_fallback = false;
};

/// Least squares restricted to `support`. When the column-normalised Gram
/// matrix has condition number above 1e12, a ridge of 1e-8 * trace / |support|
/// is added and the fit is flagged.
OlsFit fit_subset_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                      std::span<const std::size_t> support);

enum class SearchStrategy { Exhaustive, GreedySwap };
enum class SupportMode { Shared, Free };

std::string to_string(SearchStrategy s);
std::string to_string(SupportMode m);
SearchStrategy parse_strategy(const std::string& s);
SupportMode parse_support_mode(const std::string& s);

struct SubsetSolution {
  std::size_t support_size = 0;
  SupportMode mode = SupportMode::Shared;
  Support shared_support;                 // shared mode
  std::vector<Support> step_supports;     // one per step (both modes)
  std::size_t distinct_supports = 1;      // |{S^i}|
  Eigen::MatrixXd coefficients;           // N_q x n_steps, zero off-support
  double train_rss = 0.0;
  double validation_rss = 0.0;
  std::vector<double> per_step_train_rss;
  std::vector<double> per_step_validation_rss;
  std::vector<bool> ridge_flags;          // per step
};

struct SubsetPath {
  std::vector<SubsetSolution> solutions;  // support sizes 1..s_max
};

/// Precomputed per-step Gram systems for one train/validation pair. Columns
/// are normalised by their training norms; coefficients are mapped back.
class SubsetProblem {
 public:
  SubsetProblem(const CandidateLibrary& train, const CandidateLibrary& validation);

  std::size_t n_steps() const { return steps_.size(); }
  std::size_t n_terms() const { return n_terms_; }

  /// Validation RSS of the training-data fit restricted to `support` at one step.
  double step_validation_rss(std::size_t step, std::span<const std::size_t> support) const;
  /// Sum of step_validation_rss over all steps, memoised per support.
  double total_validation_rss(std::span<const std::size_t> support) const;

  /// Refits every step on its support from the raw matrices and scores it.
  SubsetSolution assemble(std::size_t support_size, SupportMode mode,
                          const std::vector<Support>& step_supports) const;

  const CandidateLibrary& train() const { return *train_; }
  const CandidateLibrary& validation() const { return *validation_; }

 private:
  struct StepSystem {
    Eigen::MatrixXd gram, val_gram;
    Eigen::VectorXd rhs, val_rhs;
    double yty = 0.0, val_yty = 0.0;
  };

  const CandidateLibrary* train_;
  const CandidateLibrary* validation_;
  std::size_t n_terms_ = 0;
  std::vector<StepSystem> steps_;
  mutable std::unordered_map<std::uint64_t, double> total_cache_;
};

/// Best single support shared by all steps.
SubsetSolution search_shared_support(const SubsetProblem& problem, std::size_t support_size,
                                     SearchStrategy strategy);

/// Independent greedy-swap search per step.
SubsetSolution search_free_supports(const SubsetProblem& problem, std::size_t support_size);

/// Solutions for every support size 1..s_max.
SubsetPath build_path(const SubsetProblem& problem, std::size_t s_max, SupportMode mode,
                      SearchStrategy strategy = SearchStrategy::GreedySwap);

/// Greedy forward selection then best-single-swap refinement over an arbitrary
/// support score, with a best double exchange whenever single swaps stall.
/// Ties go to the lowest term index.
template <typename Score>
Support greedy_swap_search(std::size_t n_terms, std::size_t support_size, Score&& score);

}  // namespace parapde

#include "parapde/best_subset_impl.hpp"
