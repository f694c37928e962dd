#pragma once

#include <span>
#include <string>
#include <vector>

#include "parapde/grid.hpp"
#include "parapde/preprocessing.hpp"

namespace parapde {

/// One-sided power spectral density estimate.
struct Psd {
  std::vector<double> frequencies;  // cycles per unit of the sample spacing
  std::vector<double> power;
};

/// Boxcar-window periodogram with density scaling: interior bins carry
/// 2|X_k|^2 / (fs n), DC and Nyquist are not doubled.
Psd periodogram(std::span<const double> signal, double sample_spacing, bool remove_mean = false);

/// Same as periodogram; named for its role as the per-step PSD sample.
Psd step_psd(std::span<const double> profile, double sample_spacing);

/// Trapezoidal integral of power over frequency.
double integrate_psd(const Psd& psd);

/// Integrated periodogram power of one step's profile.
double psd_transform_step(std::span<const double> profile, double sample_spacing);

enum class TransformId { Identity, PsdIntegrated };

std::string to_string(TransformId id);
TransformId parse_transform(const std::string& s);

struct TransformedSeries {
  std::vector<double> values;
  TransformId transform_id = TransformId::PsdIntegrated;
};

/// Identity flattens every profile in step order; PsdIntegrated maps each
/// step's profile to one scalar.
TransformedSeries transform_field(std::span<const Eigen::VectorXd> profiles, double sample_spacing,
                                  TransformId id);

/// ||T(target) - T(model)||^2.
double generalized_rss(std::span<const Eigen::VectorXd> target, std::span<const Eigen::VectorXd> model,
                       double sample_spacing, TransformId id);

struct FrequencyMask {
  std::vector<std::size_t> retained_indices;  // one-sided bin indices
  double percentile = 90.0;
  double threshold = 0.0;
  std::vector<double> aggregate_power;
};

enum class PowerAggregation { Joint, PerColumn };

PowerAggregation parse_power_aggregation(const std::string& s);
std::string to_string(PowerAggregation a);

struct FilteredLibrary {
  CandidateLibrary library;
  FrequencyMask mask;
};

/// DFT of every step's columns and target along the sample axis; keeps bins
/// whose aggregate power reaches the given percentile. Each kept bin
/// contributes its real and imaginary parts as rows, scaled so that keeping
/// every bin preserves squared norms exactly.
FilteredLibrary frequency_filter_validation(const CandidateLibrary& validation, double percentile = 90.0,
                                            PowerAggregation aggregation = PowerAggregation::Joint);

/// Applies an existing mask (same scaling as above).
CandidateLibrary apply_frequency_mask(const CandidateLibrary& library, const FrequencyMask& mask);

/// Linear-interpolation percentile (numpy's default).
double percentile(std::vector<double> values, double q);

struct RepresentationError {
  std::string representation;
  double rel_error = 0.0;
};

/// Relative Frobenius errors of the raw, DFT-magnitude and PSD-integrated
/// representations of a noisy derivative field against a clean one. Profiles
/// run along the sample axis implied by `axis`.
std::vector<RepresentationError> representation_error_report(const Field& clean, const Field& noisy,
                                                             ParameterAxis axis);

}  // namespace parapde
