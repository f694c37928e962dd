#include <bit>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "parapde/errors.hpp"
#include "parapde/selection.hpp"

using namespace parapde;

namespace {

// Exact one-sided p-value by enumerating every split of the pooled sample and
// counting pairwise wins (ties count one half).
double enumerated_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const unsigned n = static_cast<unsigned>(pooled.size());
  auto u_of = [&](unsigned mask) {
    double u = 0.0;
    for (unsigned i = 0; i < n; ++i) {
      if (!(mask >> i & 1u)) continue;
      for (unsigned j = 0; j < n; ++j) {
        if (mask >> j & 1u) continue;
        if (pooled[i] > pooled[j]) u += 1.0;
        else if (pooled[i] == pooled[j]) u += 0.5;
      }
    }
    return u;
  };
  const double observed = u_of((1u << a.size()) - 1u);
  std::size_t total = 0, at_most = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != static_cast<int>(a.size())) continue;
    ++total;
    if (u_of(mask) <= observed + 1e-9) ++at_most;
  }
  return static_cast<double>(at_most) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("information criteria formulas") {
  const double n = 100.0;
  const CriterionScore zero = information_criteria(0.0, 100, 3.0, 0.0);
  CHECK(zero.bic == doctest::Approx(n * std::log(kZeta) + std::log(n) * 3.0).epsilon(1e-14));
  CHECK(zero.aic == doctest::Approx(n * std::log(kZeta) + 6.0).epsilon(1e-14));

  const CriterionScore two = information_criteria(0.5, 100, 2.0, 0.0);
  const CriterionScore three = information_criteria(0.5, 100, 3.0, 0.0);
  CHECK(three.bic - two.bic == doctest::Approx(std::log(n)).epsilon(1e-12));
  CHECK(three.aic - two.aic == doctest::Approx(2.0).epsilon(1e-12));
  const double ll = n * std::log(2 * std::numbers::pi * 0.5 / n + kZeta);
  CHECK(two.aicc == doctest::Approx(ll + 4.0 + 12.0 / 97.0).epsilon(1e-12));

  CHECK(two.ubic == two.bic);
  const CriterionScore penalised = information_criteria(0.5, 100, 2.0, 0.3);
  CHECK(penalised.ubic - penalised.bic == doctest::Approx(0.3 * std::log(n)));

  const CriterionScore tight = information_criteria(0.5, 4, 3.0, 0.0);
  CHECK(tight.aicc_undefined);
  CHECK(std::isinf(tight.aicc));
  CHECK_FALSE(information_criteria(0.5, 5, 3.0, 0.0).aicc_undefined);
  CHECK_THROWS_AS(information_criteria(-1.0, 10, 1.0, 0.0), NumericalError);
}

TEST_CASE("mann-whitney small examples") {
  const std::vector<double> a{1, 2}, b{3, 4};
  const auto r = mann_whitney_less(a, b);
  CHECK(r.exact);
  CHECK(r.u_statistic == 0.0);
  CHECK(r.p_value == doctest::Approx(1.0 / 6.0));
  CHECK(mann_whitney_less(b, a).p_value == 1.0);

  const std::vector<double> same{2, 2, 2};
  const auto t = mann_whitney_less(same, same);
  CHECK(t.all_tied);
  CHECK(t.p_value == 0.5);
  CHECK(mann_whitney_less(std::vector<double>{1}, b).p_value == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(mann_whitney_less(std::vector<double>{}, b), ConfigError);
}

TEST_CASE("mann-whitney exact p-values match enumeration from 1 by 1 up to 8 by 8, ties included") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> level(0, 5);
  for (std::size_t n1 = 1; n1 <= 8; ++n1) {
    for (std::size_t n2 = 1; n2 <= 8; ++n2) {
      std::vector<double> a(n1), b(n2);
      for (double& v : a) v = level(rng);
      for (double& v : b) v = level(rng) + 1;
      const auto r = mann_whitney_less(a, b);
      REQUIRE(r.exact);
      if (r.all_tied) continue;
      CHECK(r.p_value == doctest::Approx(enumerated_p(a, b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("mann-whitney normal approximation on large samples") {
  std::vector<double> a, b;
  for (int i = 0; i < 30; ++i) {
    a.push_back(i);
    b.push_back(i + 100);
  }
  const auto r = mann_whitney_less(a, b);
  CHECK_FALSE(r.exact);
  CHECK(r.p_value < 1e-8);
  CHECK(mann_whitney_less(a, a).p_value == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("support-size filter") {
  const std::vector<std::size_t> one{2};
  const std::vector<double> one_bic{5.0};
  const FilterReport single = filter_support_sizes(one, one_bic, Eigen::MatrixXd::Constant(1, 10, 1.0));
  CHECK(single.significant_sizes == std::vector<std::size_t>{2});

  // Size 2 clearly beats size 1 at every step; size 3 only adds jitter.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  Eigen::MatrixXd rows(3, 20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    rows(0, i) = 100.0 + static_cast<double>(i);
    rows(1, i) = 50.0 + static_cast<double>(i);
    rows(2, i) = rows(1, i) + 0.1 * z(rng);
  }
  const std::vector<std::size_t> sizes{1, 2, 3};
  const std::vector<double> global{100.0, 50.0, 49.9};
  const FilterReport rep = filter_support_sizes(sizes, global, rows);
  CHECK(rep.consecutive_p[0] < 0.01);
  CHECK(rep.consecutive_p[1] > 0.01);
  CHECK(rep.p_cut == rep.consecutive_p[0]);
  CHECK(rep.reference_size[2] == 2);
  CHECK(rep.significant_sizes == std::vector<std::size_t>{1, 2});

  // A worse global BIC is never admitted, whatever the per-step test says.
  const std::vector<double> worse{100.0, 120.0, 130.0};
  CHECK(filter_support_sizes(sizes, worse, rows).significant_sizes == std::vector<std::size_t>{1});
}

TEST_CASE("lambda tuning") {
  const auto grid = default_lambda_grid();
  REQUIRE(grid.size() == 17);
  CHECK(grid.back() == 4.0);

  const std::vector<std::size_t> sizes{1, 2, 3};
  const std::vector<double> bic{10.0, 0.0, 1.0};
  const std::vector<double> flat{0.2, 0.2, 0.2};
  const LambdaSelection same = tune_lambda_star(sizes, bic, flat, 100, sizes, grid);
  CHECK(same.lambda_star == 0.0);
  CHECK(same.selected_size == 2);
  CHECK_FALSE(same.unstable);

  const std::vector<std::size_t> only{3};
  CHECK(tune_lambda_star(sizes, bic, flat, 100, only, grid).selected_size == 3);
  CHECK(tune_lambda_star(sizes, bic, flat, 100, only, grid).lambda_star == 0.0);

  // Size 2 fits better but is unstable: the penalty overtakes the gap of 10
  // once 10^lambda * 0.1 * log(100) > 10, first on the grid at lambda = 1.5.
  const std::vector<std::size_t> two{1, 2};
  const std::vector<double> two_bic{10.0, 0.0, 1.0};
  const std::vector<double> v{0.0, 0.1, 0.5};
  const LambdaSelection cross = tune_lambda_star(sizes, two_bic, v, 100, two, grid);
  CHECK(cross.lambda_star == 1.5);
  CHECK(cross.selected_size == 1);
  CHECK(cross.argmin_per_lambda.front() == 2);
  CHECK_THROWS_AS(tune_lambda_star(sizes, bic, flat, 100, std::vector<std::size_t>{}, grid), ConfigError);
}
