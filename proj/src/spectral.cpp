#include "parapde/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <sstream>

#include "parapde/errors.hpp"
#include "parapde/fft.hpp"

namespace parapde {

namespace {

RealFft& fft_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Orthonormal one-sided weights: keeping every bin preserves the squared norm.
double bin_weight(std::size_t k, std::size_t n) {
  const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
  return std::sqrt((unpaired ? 1.0 : 2.0) / static_cast<double>(n));
}

bool has_imaginary(std::size_t k, std::size_t n) { return !(k == 0 || (n % 2 == 0 && k == n / 2)); }

std::vector<std::complex<double>> dft(const Eigen::VectorXd& v) {
  return fft_for(static_cast<std::size_t>(v.size())).forward(as_span(v));
}

}  // namespace

Psd periodogram(std::span<const double> signal, double sample_spacing, bool remove_mean) {
  const std::size_t n = signal.size();
  if (n < 4) throw ConfigError("periodogram needs at least 4 samples");
  if (!(sample_spacing > 0.0)) throw ConfigError("periodogram needs a positive sample spacing");
  std::vector<double> x(signal.begin(), signal.end());
  if (remove_mean) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(n);
    for (double& v : x) v -= m;
  }
  const auto spec = fft_for(n).forward(x);
  const double fs = 1.0 / sample_spacing;
  Psd psd;
  psd.frequencies.resize(spec.size());
  psd.power.resize(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    psd.frequencies[k] = static_cast<double>(k) * fs / static_cast<double>(n);
    const double scale = has_imaginary(k, n) ? 2.0 : 1.0;
    psd.power[k] = scale * std::norm(spec[k]) / (fs * static_cast<double>(n));
  }
  return psd;
}

Psd step_psd(std::span<const double> profile, double sample_spacing) {
  return periodogram(profile, sample_spacing);
}

double integrate_psd(const Psd& psd) {
  double acc = 0.0;
  for (std::size_t k = 1; k < psd.power.size(); ++k)
    acc += 0.5 * (psd.power[k] + psd.power[k - 1]) * (psd.frequencies[k] - psd.frequencies[k - 1]);
  return acc;
}

double psd_transform_step(std::span<const double> profile, double sample_spacing) {
  return integrate_psd(periodogram(profile, sample_spacing));
}

std::string to_string(TransformId id) { return id == TransformId::Identity ? "identity" : "psd"; }

TransformId parse_transform(const std::string& s) {
  if (s == "identity") return TransformId::Identity;
  if (s == "psd" || s == "psd_integrated") return TransformId::PsdIntegrated;
  throw ConfigError("unknown transform '" + s + "' (expected identity or psd)");
}

TransformedSeries transform_field(std::span<const Eigen::VectorXd> profiles, double sample_spacing,
                                  TransformId id) {
  TransformedSeries out;
  out.transform_id = id;
  if (id == TransformId::Identity) {
    for (const auto& p : profiles) out.values.insert(out.values.end(), p.data(), p.data() + p.size());
  } else {
    out.values.reserve(profiles.size());
    for (const auto& p : profiles) out.values.push_back(psd_transform_step(as_span(p), sample_spacing));
  }
  return out;
}

double generalized_rss(std::span<const Eigen::VectorXd> target, std::span<const Eigen::VectorXd> model,
                       double sample_spacing, TransformId id) {
  if (target.size() != model.size()) throw DataError("generalized_rss: step counts differ");
  const TransformedSeries a = transform_field(target, sample_spacing, id);
  const TransformedSeries b = transform_field(model, sample_spacing, id);
  if (a.values.size() != b.values.size()) throw DataError("generalized_rss: profile lengths differ");
  double rss = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) rss += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
  return rss;
}

PowerAggregation parse_power_aggregation(const std::string& s) {
  if (s == "joint") return PowerAggregation::Joint;
  if (s == "per_column") return PowerAggregation::PerColumn;
  throw ConfigError("unknown power aggregation '" + s + "' (expected joint or per_column)");
}

std::string to_string(PowerAggregation a) { return a == PowerAggregation::Joint ? "joint" : "per_column"; }

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

CandidateLibrary apply_frequency_mask(const CandidateLibrary& library, const FrequencyMask& mask) {
  const std::size_t n = library.n_samples();
  std::size_t rows = 0;
  for (std::size_t k : mask.retained_indices) rows += has_imaginary(k, n) ? 2 : 1;

  CandidateLibrary out;
  out.axis = library.axis;
  out.terms = library.terms;
  out.axis_values = library.axis_values;
  out.sample_spacing = library.sample_spacing;
  const auto n_cols = static_cast<Eigen::Index>(library.n_terms());

  for (std::size_t s = 0; s < library.n_steps(); ++s) {
    Eigen::MatrixXd q(static_cast<Eigen::Index>(rows), n_cols);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    auto fill = [&](const Eigen::VectorXd& v, auto&& put) {
      const auto spec = dft(v);
      Eigen::Index r = 0;
      for (std::size_t k : mask.retained_indices) {
        const double w = bin_weight(k, n);
        put(r++, w * spec[k].real());
        if (has_imaginary(k, n)) put(r++, w * spec[k].imag());
      }
    };
    fill(library.targets[s], [&](Eigen::Index r, double v) { y(r) = v; });
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      const Eigen::VectorXd col = library.steps[s].col(c);
      fill(col, [&](Eigen::Index r, double v) { q(r, c) = v; });
    }
    out.steps.push_back(std::move(q));
    out.targets.push_back(std::move(y));
  }
  return out;
}

FilteredLibrary frequency_filter_validation(const CandidateLibrary& validation, double pct,
                                            PowerAggregation aggregation) {
  const std::size_t n = validation.n_samples();
  if (n < 8) throw ConfigError("frequency filter needs at least 8 samples along the transformed axis");
  if (!(pct >= 0.0 && pct <= 100.0)) throw ConfigError("percentile must be in [0, 100]");
  const std::size_t n_bins = n / 2 + 1;
  const std::size_t n_cols = validation.n_terms();

  // Mean |DFT|^2 per bin and column, averaged over steps.
  Eigen::MatrixXd power = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_bins), static_cast<Eigen::Index>(n_cols));
  for (std::size_t s = 0; s < validation.n_steps(); ++s) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      const Eigen::VectorXd col = validation.steps[s].col(static_cast<Eigen::Index>(c));
      const auto spec = dft(col);
      for (std::size_t k = 0; k < n_bins; ++k) power(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) += std::norm(spec[k]);
    }
  }
  power /= static_cast<double>(std::max<std::size_t>(validation.n_steps(), 1));

  FrequencyMask mask;
  mask.percentile = pct;
  if (aggregation == PowerAggregation::Joint) {
    mask.aggregate_power.resize(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) mask.aggregate_power[k] = power.row(static_cast<Eigen::Index>(k)).mean();
    mask.threshold = percentile(mask.aggregate_power, pct);
    for (std::size_t k = 0; k < n_bins; ++k)
      if (mask.aggregate_power[k] >= mask.threshold) mask.retained_indices.push_back(k);
  } else {
    // Union of each column's own top-percentile bins.
    std::vector<bool> keep(n_bins, false);
    mask.aggregate_power.assign(n_bins, 0.0);
    for (std::size_t c = 0; c < n_cols; ++c) {
      std::vector<double> col(n_bins);
      for (std::size_t k = 0; k < n_bins; ++k) col[k] = power(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c));
      const double thr = percentile(col, pct);
      for (std::size_t k = 0; k < n_bins; ++k)
        if (col[k] >= thr && col[k] > 0.0) keep[k] = true;
      for (std::size_t k = 0; k < n_bins; ++k) mask.aggregate_power[k] += col[k] / static_cast<double>(n_cols);
    }
    for (std::size_t k = 0; k < n_bins; ++k)
      if (keep[k]) mask.retained_indices.push_back(k);
    mask.threshold = std::numeric_limits<double>::quiet_NaN();
  }
  if (mask.retained_indices.size() < 2) {
    std::ostringstream msg;
    msg << "frequency filter retained " << mask.retained_indices.size()
        << " frequencies at percentile " << pct << "; use a lower percentile";
    throw ConfigError(msg.str());
  }
  return {apply_frequency_mask(validation, mask), mask};
}

std::vector<RepresentationError> representation_error_report(const Field& clean, const Field& noisy,
                                                             ParameterAxis axis) {
  if (clean.values.rows() != noisy.values.rows() || clean.values.cols() != noisy.values.cols())
    throw DataError("representation_error_report: shapes differ");
  const bool temporal = axis == ParameterAxis::Temporal;
  const double spacing = temporal ? clean.grid.dx() : clean.grid.dt();
  const Eigen::Index n_steps = temporal ? clean.values.cols() : clean.values.rows();

  auto profiles = [&](const Eigen::MatrixXd& m) {
    std::vector<Eigen::VectorXd> out;
    for (Eigen::Index s = 0; s < n_steps; ++s)
      out.push_back(temporal ? Eigen::VectorXd(m.col(s)) : Eigen::VectorXd(m.row(s).transpose()));
    return out;
  };
  const auto pc = profiles(clean.values);
  const auto pn = profiles(noisy.values);

  auto rel = [](double num2, double den2) {
    if (den2 == 0.0) return num2 == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num2 / den2);
  };

  std::vector<RepresentationError> out;
  out.push_back({"raw", rel((noisy.values - clean.values).squaredNorm(), clean.values.squaredNorm())});

  double num = 0.0, den = 0.0;
  for (std::size_t s = 0; s < pc.size(); ++s) {
    const auto a = dft(pc[s]);
    const auto b = dft(pn[s]);
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = std::abs(b[k]) - std::abs(a[k]);
      num += d * d;
      den += std::norm(a[k]);
    }
  }
  out.push_back({"dft_magnitude", rel(num, den)});

  const auto tc = transform_field(pc, spacing, TransformId::PsdIntegrated);
  const auto tn = transform_field(pn, spacing, TransformId::PsdIntegrated);
  num = den = 0.0;
  for (std::size_t s = 0; s < tc.values.size(); ++s) {
    num += (tn.values[s] - tc.values[s]) * (tn.values[s] - tc.values[s]);
    den += tc.values[s] * tc.values[s];
  }
  out.push_back({"psd_integrated", rel(num, den)});
  return out;
}

}  // namespace parapde
