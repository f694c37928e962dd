#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "parapde/errors.hpp"
#include "parapde/spectral.hpp"

using namespace parapde;

namespace {

std::vector<double> gaussian_noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (double& x : v) x = z(rng);
  return v;
}

double mean_square(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s / static_cast<double>(v.size());
}

// Library of `n_steps` steps whose columns are independent noise.
CandidateLibrary noise_library(std::size_t n_samples, std::size_t n_terms, std::size_t n_steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  CandidateLibrary lib;
  const auto all = all_terms();
  lib.terms.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_terms));
  lib.sample_spacing = 0.1;
  for (std::size_t s = 0; s < n_steps; ++s) {
    Eigen::MatrixXd q(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(n_terms));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n_samples));
    for (Eigen::Index k = 0; k < q.size(); ++k) q.data()[k] = z(rng);
    for (Eigen::Index k = 0; k < y.size(); ++k) y[k] = z(rng);
    lib.steps.push_back(q);
    lib.targets.push_back(y);
    lib.axis_values.push_back(static_cast<double>(s));
  }
  return lib;
}

}  // namespace

TEST_CASE("periodogram satisfies Parseval") {
  for (std::size_t n : {64u, 65u, 256u}) {
    const auto x = gaussian_noise(n, n);
    const double dx = 0.37;
    const Psd p = periodogram(x, dx);
    REQUIRE(p.power.size() == n / 2 + 1);
    const double df = p.frequencies[1] - p.frequencies[0];
    double rect = 0.0;
    for (double v : p.power) rect += v * df;
    CHECK(std::abs(rect - mean_square(x)) <= 1e-12 * mean_square(x));
  }

  // Band-limited and zero-mean: the trapezoid rule is exact as well.
  const std::size_t n = 128;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    x[i] = std::sin(2 * std::numbers::pi * 3 * t) + 0.5 * std::cos(2 * std::numbers::pi * 11 * t);
  }
  CHECK(std::abs(psd_transform_step(x, 1.0 / n) - mean_square(x)) <= 1e-12);
}

TEST_CASE("integrated power of a sine is A^2 / 2") {
  const std::size_t n = 200;
  const double a = 3.0;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = a * std::sin(2 * std::numbers::pi * 7 * static_cast<double>(i) / n);
  CHECK(psd_transform_step(x, 0.05) == doctest::Approx(a * a / 2).epsilon(1e-12));
}

TEST_CASE("psd transform is quadratic and per-step") {
  const auto x = gaussian_noise(100, 3);
  std::vector<double> scaled(x);
  for (double& v : scaled) v *= -2.5;
  CHECK(psd_transform_step(scaled, 0.1) == doctest::Approx(6.25 * psd_transform_step(x, 0.1)).epsilon(1e-12));

  // Changing one step changes only that entry of the series.
  std::vector<Eigen::VectorXd> profiles;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto v = gaussian_noise(64, 10 + s);
    profiles.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), 64));
  }
  const auto before = transform_field(profiles, 0.1, TransformId::PsdIntegrated).values;
  profiles[2] *= 3.0;
  const auto after = transform_field(profiles, 0.1, TransformId::PsdIntegrated).values;
  REQUIRE(after.size() == 5);
  for (std::size_t s = 0; s < 5; ++s) {
    if (s == 2) CHECK(after[s] == doctest::Approx(9 * before[s]));
    else CHECK(after[s] == before[s]);
  }
}

TEST_CASE("identity transform flattens and generalized rss matches the plain rss") {
  std::vector<Eigen::VectorXd> a{Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(4, 5, 6)};
  std::vector<Eigen::VectorXd> b{Eigen::Vector3d(1, 2, 4), Eigen::Vector3d(4, 3, 6)};
  const auto t = transform_field(a, 1.0, TransformId::Identity);
  CHECK(t.values == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(generalized_rss(a, b, 1.0, TransformId::Identity) == 5.0);
  const std::vector<Eigen::VectorXd> c{Eigen::Vector4d(1, -2, 3, 0.5)};
  CHECK(generalized_rss(c, c, 1.0, TransformId::PsdIntegrated) == 0.0);
  CHECK_THROWS_AS(generalized_rss(a, a, 1.0, TransformId::PsdIntegrated), ConfigError);
  CHECK(parse_transform("psd") == TransformId::PsdIntegrated);
  CHECK_THROWS_AS(parse_transform("wavelet"), ConfigError);
}

TEST_CASE("frequency filter: full retention preserves norms, white noise keeps about 10%") {
  const CandidateLibrary lib = noise_library(128, 4, 6, 21);
  const FilteredLibrary all = frequency_filter_validation(lib, 0.0);
  CHECK(all.mask.retained_indices.size() == 65);
  for (std::size_t s = 0; s < lib.n_steps(); ++s) {
    CHECK(all.library.steps[s].rows() == 128);
    CHECK(all.library.targets[s].squaredNorm() == doctest::Approx(lib.targets[s].squaredNorm()).epsilon(1e-12));
    for (Eigen::Index c = 0; c < 4; ++c)
      CHECK(all.library.steps[s].col(c).squaredNorm() == doctest::Approx(lib.steps[s].col(c).squaredNorm()).epsilon(1e-12));
    // Inner products are preserved too, so least-squares fits are unchanged.
    CHECK(all.library.steps[s].col(0).dot(all.library.targets[s]) ==
          doctest::Approx(lib.steps[s].col(0).dot(lib.targets[s])).epsilon(1e-10));
  }

  const CandidateLibrary big = noise_library(512, 4, 8, 22);
  const FilteredLibrary top = frequency_filter_validation(big, 90.0);
  const double bins = 257.0;
  CHECK(std::abs(static_cast<double>(top.mask.retained_indices.size()) - 0.1 * bins) <= 3.0);

  // Re-applying the mask reproduces the filtered library.
  const CandidateLibrary again = apply_frequency_mask(big, top.mask);
  for (std::size_t s = 0; s < big.n_steps(); ++s) {
    CHECK(again.steps[s] == top.library.steps[s]);
    CHECK(again.targets[s] == top.library.targets[s]);
  }
  CHECK_THROWS_AS(frequency_filter_validation(big, 120.0), ConfigError);
}

TEST_CASE("frequency filter keeps the dominant band") {
  // Every column oscillates at bin 5 plus weak noise: bin 5 must be retained.
  CandidateLibrary lib = noise_library(64, 3, 4, 31);
  for (auto& q : lib.steps) {
    q *= 1e-3;
    for (Eigen::Index i = 0; i < 64; ++i)
      for (Eigen::Index c = 0; c < 3; ++c) q(i, c) += std::cos(2 * std::numbers::pi * 5 * static_cast<double>(i) / 64 + c);
  }
  const FrequencyMask mask = frequency_filter_validation(lib, 95.0).mask;
  CHECK(std::find(mask.retained_indices.begin(), mask.retained_indices.end(), 5u) != mask.retained_indices.end());
  CHECK(mask.retained_indices.size() <= 4);
}

TEST_CASE("percentile follows linear interpolation") {
  CHECK(percentile({1, 2, 3, 4}, 50.0) == 2.5);
  CHECK(percentile({5, 1, 3}, 100.0) == 5.0);
  CHECK(percentile({5, 1, 3}, 0.0) == 1.0);
  CHECK(percentile({0, 10}, 90.0) == doctest::Approx(9.0));
}

TEST_CASE("representation errors vanish for identical fields and rank psd below raw for noise") {
  const Grid g{0.0, 2 * std::numbers::pi, 128, 0.0, 1.0, 64, true};
  Eigen::MatrixXd v(128, 64);
  for (Eigen::Index i = 0; i < 128; ++i)
    for (Eigen::Index j = 0; j < 64; ++j) v(i, j) = std::sin(g.x(static_cast<std::size_t>(i)) + 0.1 * static_cast<double>(j));
  const Field clean(g, v);
  for (const auto& r : representation_error_report(clean, clean, ParameterAxis::Temporal)) CHECK(r.rel_error == 0.0);

  Field noisy = clean;
  const auto z = gaussian_noise(static_cast<std::size_t>(v.size()), 41);
  for (Eigen::Index k = 0; k < v.size(); ++k) noisy.values.data()[k] += 0.1 * z[static_cast<std::size_t>(k)];
  const auto rows = representation_error_report(clean, noisy, ParameterAxis::Temporal);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].representation == "raw");
  CHECK(rows[2].representation == "psd_integrated");
  CHECK(rows[2].rel_error < rows[0].rel_error);
}
