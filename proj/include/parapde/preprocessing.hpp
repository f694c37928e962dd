#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "parapde/grid.hpp"
#include "parapde/terms.hpp"

namespace parapde {

// --- Savitzky-Golay ------------------------------------------------------

/// Least-squares polynomial weights over sample offsets [-left, right] that
/// estimate the `deriv`-th derivative at offset 0, in per-sample units.
std::vector<double> savgol_weights(int left, int right, int polyorder, int deriv);

/// Applies a Savitzky-Golay filter to one sequence. Non-periodic sequences
/// use one-sided windows of the same length near the ends.
std::vector<double> savgol_filter(std::span<const double> y, int window, int polyorder, int deriv,
                                  double spacing, bool periodic);

/// Smooths along x (wrapping on periodic grids), then along t.
Field smooth_field(const Field& noisy, int window, int polyorder);

// --- Kalman time derivative ------------------------------------------------

struct KalmanDerivative {
  Field u_t;
  double ratio = 0.0;           // selected process/observation variance ratio
  double log_likelihood = 0.0;  // total profile innovation log-likelihood at `ratio`
};

/// Default ratio grid {10^k : k = -8..4}.
std::vector<double> default_ratio_grid();

/// Ratio maximising the profile innovation log-likelihood summed over all
/// spatial locations; returns (ratio, log-likelihood).
std::pair<double, double> select_kalman_ratio(const Field& field, std::span<const double> ratio_grid);

/// Local-linear-trend smoother run along time at every spatial location. The
/// ratio is expressed per frame, so the grid is independent of dt. When
/// `tuning_field` is given the ratio is chosen on it instead (the raw noisy
/// data, whose residuals match the white observation-noise model).
KalmanDerivative kalman_time_derivative(const Field& field, std::span<const double> ratio_grid,
                                        const Field* tuning_field = nullptr);

/// Smoothed velocity of one series for a fixed ratio; also reports the
/// profile log-likelihood of the innovations.
std::vector<double> kalman_smoothed_velocity(std::span<const double> y, double dt, double ratio,
                                             double* log_likelihood = nullptr);

// --- Spatial derivatives and library ---------------------------------------

struct DerivativeStack {
  Field u;
  std::array<Field, 4> spatial;  // u_x, u_xx, u_xxx, u_xxxx
  Field u_t;

  /// d = 0 returns u itself.
  const Field& derivative(int order) const { return order == 0 ? u : spatial[static_cast<std::size_t>(order - 1)]; }
};

/// Savitzky-Golay derivative filters along x for orders 1..max_order; u_t is
/// left empty. Requires polyorder >= max_order + 1.
DerivativeStack spatial_derivatives(const Field& field, int max_order, int window, int polyorder);

struct CandidateLibrary {
  ParameterAxis axis = ParameterAxis::Temporal;
  std::vector<TermDescriptor> terms;
  std::vector<Eigen::MatrixXd> steps;   // Q^i, n_samples x N_q
  std::vector<Eigen::VectorXd> targets;  // U_t^i
  std::vector<double> axis_values;       // parameter-axis coordinate per step
  double sample_spacing = 1.0;           // spacing along the sample axis

  std::size_t n_steps() const { return steps.size(); }
  std::size_t n_samples() const { return steps.empty() ? 0 : static_cast<std::size_t>(steps[0].rows()); }
  std::size_t n_terms() const { return terms.size(); }

  /// Keeps only the listed sample rows in every step.
  CandidateLibrary select_samples(std::span<const std::size_t> rows) const;
  /// Keeps only steps in [first, last).
  CandidateLibrary select_steps(std::size_t first, std::size_t last) const;
};

CandidateLibrary build_library(const DerivativeStack& stack, ParameterAxis axis);

struct LibrarySplit {
  CandidateLibrary train;
  CandidateLibrary validation;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
};

/// Seeded partition of the sample axis shared by every step.
LibrarySplit train_validation_split(const CandidateLibrary& library, double fraction,
                                    std::uint64_t seed);

}  // namespace parapde
