#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "parapde/ard.hpp"
#include "parapde/best_subset.hpp"
#include "parapde/coeff_fit.hpp"
#include "parapde/field_io.hpp"
#include "parapde/selection.hpp"
#include "parapde/spectral.hpp"

namespace parapde {

inline constexpr const char* kToolVersion = "1.0.0";

/// Every tunable of one run. Loaded from `key = value` text; see README for
/// the schema.
struct PipelineConfig {
  // Dataset: a directory written by `generate`, or a benchmark to solve.
  std::string data_dir;
  std::string pde = "burgers";
  double noise = 2.0;
  std::uint64_t seed = 1;
  std::size_t solver_substeps = 20;

  // Preprocessing.
  bool smooth = true;
  int smooth_window = 15;
  int smooth_polyorder = 3;
  int deriv_window = 17;
  int deriv_polyorder = 5;
  std::vector<double> kalman_ratios = default_ratio_grid();
  std::string axis = "auto";  // auto | temporal | spatial

  // Validation data for the subset search.
  std::string validation = "frequency";  // frequency | random_split
  double split_fraction = 0.8;
  std::uint64_t split_seed = 0;
  double frequency_percentile = 90.0;
  std::string power_aggregation = "joint";

  // Subset search.
  std::string support_mode = "shared";
  std::string search = "greedy_swap";
  std::size_t s_max = 10;

  // Uncertainty.
  int ard_max_iter = 300;
  double ard_tol = 1e-6;
  std::string ratio_coefficients = "ard_mean";  // ard_mean | ols
  std::size_t trim_low = 0;
  std::size_t trim_high = 0;

  // Selection.
  std::string transform = "psd";
  double lambda_min = 0.0;
  double lambda_max = 4.0;
  double lambda_step = 0.25;

  // Coefficient expressions.
  int max_atoms = 3;
  std::size_t fit_edge_trim = 8;  // steps dropped at each end of a non-periodic axis

  std::string out = "report";
};

/// Assigns one key. Throws ConfigError on unknown keys or unparsable values.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);

/// Reads `key = value` lines; blank lines and `#` comments are ignored.
PipelineConfig load_config(const std::filesystem::path& path);

/// Range checks across fields. Throws ConfigError.
void validate_config(const PipelineConfig& config);

/// Canonical key/value listing (the manifest snapshot). Feeding it back
/// through set_config_value reproduces the config.
std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& config);

std::vector<double> lambda_grid(const PipelineConfig& config);

/// Worker cap from PARAPDE_THREADS (1 when unset). Throws ConfigError on junk.
int thread_cap();

/// Loads config.data_dir, or solves and noises the configured benchmark.
Dataset obtain_dataset(const PipelineConfig& config);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct DiscoveryResult {
  ParameterAxis axis = ParameterAxis::Temporal;
  std::optional<PdeId> pde;
  double kalman_ratio = 0.0;
  CandidateLibrary library;  // full physical-space library
  CandidateLibrary train;
  CandidateLibrary validation;
  std::optional<FrequencyMask> mask;
  SubsetPath path;
  std::vector<UncertaintyReport> uncertainty;
  SelectionReport selection;
  std::vector<CriterionScore> psd_scores;       // lambda = 0, no uncertainty
  std::vector<CriterionScore> identity_scores;  // lambda = 0, no uncertainty
  std::vector<CoefficientFit> fits;
  std::vector<StageTiming> timings;
  std::vector<std::string> completed_stages;
  std::string failed_stage;

  const SubsetSolution& selected() const { return path.solutions[selection.selected_index]; }
  std::vector<std::size_t> selected_terms() const;
  std::vector<std::string> selected_labels() const;
};

/// Full pipeline. With `criteria_only` the ARD/UBIC/filter/fit stages are
/// skipped and only the baseline scores are produced. Stage failures are
/// rethrown with the stage name prefixed; `result` keeps what finished.
void run_discovery(const Dataset& data, const PipelineConfig& config, DiscoveryResult& result,
                   bool criteria_only = false);

/// Parameter axis from config.axis, falling back to the dataset's pde id.
ParameterAxis resolve_axis(const Dataset& data, const PipelineConfig& config);

/// u_t as the pipeline estimates it: optional smoothing, then the Kalman
/// smoother with its ratio tuned on the unsmoothed input.
KalmanDerivative estimate_time_derivative(const Field& u, const PipelineConfig& config);

/// Representation errors of the estimated u_t of the noisy field against the
/// same estimate on the clean field. Throws DataError when a noisy dataset
/// lacks u_clean.
std::vector<RepresentationError> psd_benchmark(const Dataset& data, const PipelineConfig& config);

/// Index of the smallest score, lowest size on ties.
std::size_t argmin_bic(const std::vector<CriterionScore>& scores);

}  // namespace parapde
