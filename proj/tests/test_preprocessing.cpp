#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "parapde/errors.hpp"
#include "parapde/preprocessing.hpp"

using namespace parapde;

namespace {

Field make_field(const Grid& g, auto fn) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(g.n_x), static_cast<Eigen::Index>(g.n_t));
  for (std::size_t i = 0; i < g.n_x; ++i)
    for (std::size_t j = 0; j < g.n_t; ++j) v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fn(g.x(i), g.t(j));
  return Field(g, v);
}

}  // namespace

TEST_CASE("savitzky-golay weights reproduce polynomials") {
  // Hand-derived 5-point quadratic smoothing weights.
  const auto w = savgol_weights(2, 2, 2, 0);
  const double expected[] = {-3.0 / 35, 12.0 / 35, 17.0 / 35, 12.0 / 35, -3.0 / 35};
  for (int k = 0; k < 5; ++k) CHECK(w[static_cast<std::size_t>(k)] == doctest::Approx(expected[k]).epsilon(1e-12));

  // Central first-derivative weights of a 5-point quadratic fit: k / 10.
  const auto d = savgol_weights(2, 2, 2, 1);
  for (int k = -2; k <= 2; ++k) CHECK(d[static_cast<std::size_t>(k + 2)] == doctest::Approx(k / 10.0).epsilon(1e-12));
}

TEST_CASE("smooth_field keeps cubic polynomials and constants") {
  const Grid g{0.0, 1.0, 40, 0.0, 2.0, 30, false};
  const Field cubic = make_field(g, [](double x, double t) { return 1 + x - 2 * x * x * x + t * t * t - 0.5 * x * t; });
  CHECK((smooth_field(cubic, 11, 3).values - cubic.values).cwiseAbs().maxCoeff() < 1e-10);

  const Field flat = make_field(Grid{0.0, 1.0, 40, 0.0, 2.0, 30, true}, [](double, double) { return 3.25; });
  CHECK(smooth_field(flat, 11, 3).values == flat.values);

  CHECK_THROWS_AS(smooth_field(flat, 10, 3), ConfigError);
  CHECK_THROWS_AS(smooth_field(flat, 5, 5), ConfigError);
}

TEST_CASE("smoothing reduces noise on a sine field") {
  const Grid g{0.0, 2 * std::numbers::pi, 128, 0.0, 1.0, 128, true};
  const Field clean = make_field(g, [](double x, double t) { return std::sin(x) * std::cos(t); });
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 0.04 * population_sd(clean.values));
  Field noisy = clean;
  for (Eigen::Index k = 0; k < noisy.values.size(); ++k) noisy.values.data()[k] += z(rng);
  const Field smooth = smooth_field(noisy, 15, 3);
  CHECK((smooth.values - clean.values).norm() < 0.5 * (noisy.values - clean.values).norm());
}

TEST_CASE("kalman derivative: linear, constant and sinusoidal fields") {
  const auto ratios = default_ratio_grid();
  CHECK(ratios.size() == 13);
  CHECK(ratios.front() == doctest::Approx(1e-8));
  CHECK(ratios.back() == doctest::Approx(1e4));

  const Grid g{0.0, 1.0, 8, 0.0, 3.0, 64, true};
  const Field linear = make_field(g, [](double x, double t) { return t + x; });
  const KalmanDerivative k = kalman_time_derivative(linear, ratios);
  CHECK((k.u_t.values.array() - 1.0).abs().maxCoeff() < 1e-8);

  const Field flat = make_field(g, [](double, double) { return -2.0; });
  CHECK(kalman_time_derivative(flat, ratios).u_t.values.cwiseAbs().maxCoeff() < 1e-10);

  const Grid fine{0.0, 1.0, 8, 0.0, 2 * std::numbers::pi, 1024, true};
  const Field wave = make_field(fine, [](double, double t) { return std::sin(t); });
  const Field ut = kalman_time_derivative(wave, ratios).u_t;
  double worst = 0.0;
  for (std::size_t j = 32; j + 32 < fine.n_t; ++j)
    worst = std::max(worst, std::abs(ut.values(0, static_cast<Eigen::Index>(j)) - std::cos(fine.t(j))));
  CHECK(worst < 1e-2);
}

TEST_CASE("kalman derivative agrees with central differences on smooth data") {
  const Grid g{0.0, 1.0, 16, 0.0, 2.0, 200, true};
  const Field u = make_field(g, [](double x, double t) { return std::exp(-t) * std::sin(2 * std::numbers::pi * x); });
  const Field ut = kalman_time_derivative(u, default_ratio_grid()).u_t;
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = 10; j + 10 < 200; ++j) {
    const Eigen::VectorXd fd = (u.values.col(j + 1) - u.values.col(j - 1)) / (2.0 * g.dt());
    num += (ut.values.col(j) - fd).squaredNorm();
    den += fd.squaredNorm();
  }
  CHECK(std::sqrt(num / den) < 0.05);
}

TEST_CASE("spatial derivatives: polynomial exactness and periodic sine") {
  const Grid poly_grid{-1.0, 1.0, 64, 0.0, 1.0, 8, false};
  const Field quartic = make_field(poly_grid, [](double x, double) { return x * x * x * x; });
  const DerivativeStack s = spatial_derivatives(quartic, 4, 17, 5);
  CHECK((s.derivative(4).values.array() - 24.0).abs().maxCoeff() < 1e-6);
  for (std::size_t i = 0; i < poly_grid.n_x; ++i) {
    const double x = poly_grid.x(i);
    CHECK(s.derivative(1).values(static_cast<Eigen::Index>(i), 0) == doctest::Approx(4 * x * x * x).epsilon(1e-6));
  }

  const double L = 10.0;
  const Grid per{0.0, L, 256, 0.0, 1.0, 8, true};
  const double k = 2 * std::numbers::pi / L;
  const Field wave = make_field(per, [k](double x, double) { return std::sin(k * x); });
  const DerivativeStack w = spatial_derivatives(wave, 4, 17, 5);
  for (std::size_t i = 0; i < per.n_x; ++i)
    CHECK(std::abs(w.derivative(2).values(static_cast<Eigen::Index>(i), 3) + k * k * std::sin(k * per.x(i))) < 1e-4);

  const Field flat = make_field(per, [](double, double) { return 1.5; });
  const DerivativeStack c = spatial_derivatives(flat, 4, 17, 5);
  for (int d = 1; d <= 4; ++d) CHECK(c.derivative(d).values.cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(spatial_derivatives(flat, 4, 17, 4), ConfigError);
}

TEST_CASE("library columns and axis duality") {
  const Grid g{0.0, 2 * std::numbers::pi, 64, 0.0, 1.0, 32, true};
  const Field u = make_field(g, [](double x, double t) { return std::sin(x) * std::exp(-t); });
  DerivativeStack s = spatial_derivatives(u, 4, 17, 5);
  s.u_t = make_field(g, [](double x, double t) { return -std::sin(x) * std::exp(-t); });

  const CandidateLibrary lib = build_library(s, ParameterAxis::Temporal);
  CHECK(lib.n_terms() == 20);
  CHECK(lib.n_steps() == 32);
  CHECK(lib.n_samples() == 64);
  for (std::size_t i = 0; i < lib.n_steps(); ++i) {
    CHECK((lib.steps[i].col(0).array() == 1.0).all());
    const Eigen::VectorXd uux = s.u.values.col(static_cast<Eigen::Index>(i)).cwiseProduct(s.spatial[0].values.col(static_cast<Eigen::Index>(i)));
    CHECK((lib.steps[i].col(6) - uux).cwiseAbs().maxCoeff() == 0.0);
  }

  // Interior columns match their analytic values.
  for (std::size_t j = 0; j < lib.n_steps(); ++j) {
    const double t = g.t(j);
    for (std::size_t i = 0; i < g.n_x; ++i) {
      const double x = g.x(i), e = std::exp(-t);
      const Eigen::Index r = static_cast<Eigen::Index>(i);
      CHECK(lib.steps[j](r, 7) == doctest::Approx(-std::sin(x) * e * std::sin(x) * e).epsilon(1e-3).scale(e * e));
    }
  }

  const CandidateLibrary spatial = build_library(s, ParameterAxis::Spatial);
  DerivativeStack t;
  t.u = transpose(s.u);
  for (std::size_t d = 0; d < 4; ++d) t.spatial[d] = transpose(s.spatial[d]);
  t.u_t = transpose(s.u_t);
  const CandidateLibrary dual = build_library(t, ParameterAxis::Temporal);
  REQUIRE(spatial.n_steps() == dual.n_steps());
  for (std::size_t i = 0; i < spatial.n_steps(); ++i) {
    CHECK(spatial.steps[i] == dual.steps[i]);
    CHECK(spatial.targets[i] == dual.targets[i]);
  }
}

TEST_CASE("train/validation split") {
  const Grid g{0.0, 1.0, 256, 0.0, 1.0, 8, true};
  DerivativeStack s = spatial_derivatives(make_field(g, [](double x, double t) { return std::cos(6 * x) + t; }), 4, 17, 5);
  s.u_t = s.u;
  const CandidateLibrary lib = build_library(s, ParameterAxis::Temporal);
  const LibrarySplit a = train_validation_split(lib, 0.8, 11);
  CHECK(a.train_rows.size() == 205);
  CHECK(a.validation_rows.size() == 51);
  std::set<std::size_t> all(a.train_rows.begin(), a.train_rows.end());
  for (std::size_t r : a.validation_rows) CHECK(all.insert(r).second);
  CHECK(all.size() == 256);
  CHECK(*all.rbegin() == 255);

  const LibrarySplit b = train_validation_split(lib, 0.8, 11);
  CHECK(a.train_rows == b.train_rows);
  CHECK(a.train.steps[3] == b.train.steps[3]);
  for (std::size_t k = 0; k < a.train_rows.size(); ++k)
    CHECK(a.train.steps[2].row(static_cast<Eigen::Index>(k)) == lib.steps[2].row(static_cast<Eigen::Index>(a.train_rows[k])));

  CHECK_THROWS_AS(train_validation_split(lib, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(train_validation_split(lib, 0.05, 1), ConfigError);
}
