#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "parapde/best_subset.hpp"
#include "parapde/errors.hpp"

using namespace parapde;

namespace {

// Random library whose targets follow `weights` (one row per term) plus noise.
CandidateLibrary random_library(std::size_t n_terms, std::size_t n_samples, std::size_t n_steps,
                                const Eigen::MatrixXd& weights, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  CandidateLibrary lib;
  const auto all = all_terms();
  lib.terms.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_terms));
  for (std::size_t i = 0; i < n_steps; ++i) {
    Eigen::MatrixXd q(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(n_terms));
    for (Eigen::Index k = 0; k < q.size(); ++k) q.data()[k] = z(rng);
    Eigen::VectorXd y = q * weights.col(static_cast<Eigen::Index>(i % static_cast<std::size_t>(weights.cols())));
    for (Eigen::Index k = 0; k < y.size(); ++k) y[k] += noise * z(rng);
    lib.steps.push_back(q);
    lib.targets.push_back(y);
    lib.axis_values.push_back(static_cast<double>(i));
  }
  return lib;
}

Eigen::MatrixXd planted(std::size_t n_terms, std::initializer_list<std::pair<std::size_t, double>> entries) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_terms), 1);
  for (auto [j, v] : entries) w(static_cast<Eigen::Index>(j), 0) = v;
  return w;
}

}  // namespace

TEST_CASE("fit_subset_ols oracles") {
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(6, 3);
  Eigen::VectorXd y = 2.0 * q.col(0);
  const std::vector<std::size_t> s0{0};
  const OlsFit f = fit_subset_ols(q, y, s0);
  CHECK(f.coefficients.size() == 1);
  CHECK(f.coefficients[0] == 2.0);
  CHECK_FALSE(f.ridge_fallback);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Eigen::MatrixXd sq(4, 4);
  for (Eigen::Index k = 0; k < sq.size(); ++k) sq.data()[k] = z(rng);
  Eigen::VectorXd ys(4);
  for (Eigen::Index k = 0; k < 4; ++k) ys[k] = z(rng);
  const std::vector<std::size_t> full{0, 1, 2, 3};
  CHECK((sq * fit_subset_ols(sq, ys, full).coefficients - ys).norm() < 1e-10);

  Eigen::MatrixXd a(50, 5);
  Eigen::VectorXd b(50);
  for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = z(rng);
  for (Eigen::Index k = 0; k < 50; ++k) b[k] = z(rng);
  const std::vector<std::size_t> sub{0, 2, 4};
  Eigen::MatrixXd as(50, 3);
  as << a.col(0), a.col(2), a.col(4);
  const Eigen::VectorXd normal = (as.transpose() * as).ldlt().solve(as.transpose() * b);
  CHECK((fit_subset_ols(a, b, sub).coefficients - normal).cwiseAbs().maxCoeff() < 1e-8);

  Eigen::MatrixXd dup(20, 2);
  for (Eigen::Index k = 0; k < 20; ++k) dup(k, 0) = dup(k, 1) = z(rng);
  const std::vector<std::size_t> both{0, 1};
  CHECK(fit_subset_ols(dup, dup.col(0), both).ridge_fallback);
  CHECK_THROWS(fit_subset_ols(a, b, std::vector<std::size_t>{}));
}

TEST_CASE("planted two-term support is recovered by both strategies") {
  const auto w = planted(10, {{3, 1.5}, {8, -0.7}});
  const CandidateLibrary train = random_library(10, 60, 6, w, 1e-3, 1);
  const CandidateLibrary val = random_library(10, 30, 6, w, 1e-3, 2);
  const SubsetProblem problem(train, val);
  for (SearchStrategy s : {SearchStrategy::Exhaustive, SearchStrategy::GreedySwap}) {
    const SubsetSolution sol = search_shared_support(problem, 2, s);
    CHECK(sol.shared_support == Support{3, 8});
    CHECK(sol.coefficients(3, 0) == doctest::Approx(1.5).epsilon(1e-2));
    double sum = 0.0;
    for (double v : sol.per_step_validation_rss) sum += v;
    CHECK(sol.validation_rss == doctest::Approx(sum));
  }
  const SubsetPath path = build_path(problem, 3, SupportMode::Shared);
  REQUIRE(path.solutions.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(path.solutions[k].support_size == k + 1);
  CHECK(path.solutions[1].shared_support == Support{3, 8});

  const SubsetSolution all = search_shared_support(problem, 10, SearchStrategy::GreedySwap);
  CHECK(all.shared_support.size() == 10);
  CHECK(all.shared_support == search_shared_support(problem, 10, SearchStrategy::Exhaustive).shared_support);
}

TEST_CASE("greedy swap matches the exhaustive oracle on small instances") {
  int exact = 0;
  double worst = 0.0;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd w(8, 1);
    for (Eigen::Index j = 0; j < 8; ++j) w(j, 0) = z(rng);
    const CandidateLibrary train = random_library(8, 20, 3, w, 1.0, 1000 + 2 * static_cast<std::uint64_t>(trial));
    const CandidateLibrary val = random_library(8, 12, 3, w, 1.0, 1001 + 2 * static_cast<std::uint64_t>(trial));
    const SubsetProblem problem(train, val);
    const double g = search_shared_support(problem, 3, SearchStrategy::GreedySwap).validation_rss;
    const double e = search_shared_support(problem, 3, SearchStrategy::Exhaustive).validation_rss;
    CHECK(g >= e - 1e-9 * e);
    if (g <= e * (1 + 1e-12)) ++exact;
    worst = std::max(worst, g / e - 1.0);
  }
  CHECK(exact >= 95);
  CHECK(worst <= 0.01);
}

TEST_CASE("exhaustive path rss is non-increasing when scored on the training data") {
  Eigen::MatrixXd w(8, 1);
  w << 1.0, -0.5, 0.25, 0.0, 2.0, 0.0, -1.0, 0.1;
  const CandidateLibrary lib = random_library(8, 25, 4, w, 0.3, 9);
  const SubsetProblem problem(lib, lib);
  const SubsetPath path = build_path(problem, 8, SupportMode::Shared, SearchStrategy::Exhaustive);
  for (std::size_t k = 1; k < path.solutions.size(); ++k) {
    CHECK(path.solutions[k].validation_rss <= path.solutions[k - 1].validation_rss + 1e-9);
    CHECK(path.solutions[k].train_rss <= path.solutions[k - 1].train_rss + 1e-9);
  }
}

TEST_CASE("support is stable under column permutation") {
  const auto w = planted(6, {{1, 1.0}, {4, -2.0}, {5, 0.5}});
  CandidateLibrary train = random_library(6, 40, 3, w, 0.05, 4);
  CandidateLibrary val = random_library(6, 20, 3, w, 0.05, 5);
  const Support base = search_shared_support(SubsetProblem(train, val), 3, SearchStrategy::GreedySwap).shared_support;

  const std::vector<Eigen::Index> perm{5, 3, 1, 0, 4, 2};
  auto permute = [&](CandidateLibrary lib) {
    for (auto& q : lib.steps) {
      Eigen::MatrixXd p(q.rows(), q.cols());
      for (Eigen::Index j = 0; j < 6; ++j) p.col(j) = q.col(perm[static_cast<std::size_t>(j)]);
      q = p;
    }
    return lib;
  };
  const Support got = search_shared_support(SubsetProblem(permute(train), permute(val)), 3, SearchStrategy::GreedySwap)
                          .shared_support;
  std::set<Eigen::Index> mapped;
  for (std::size_t j : got) mapped.insert(perm[j]);
  CHECK(mapped == std::set<Eigen::Index>(base.begin(), base.end()));
}

TEST_CASE("free supports") {
  const auto w = planted(8, {{2, 1.0}, {5, -1.0}});
  const CandidateLibrary train = random_library(8, 40, 6, w, 1e-3, 21);
  const CandidateLibrary val = random_library(8, 20, 6, w, 1e-3, 22);
  const SubsetProblem problem(train, val);
  const SubsetSolution free = search_free_supports(problem, 2);
  CHECK(free.distinct_supports == 1);
  for (const auto& s : free.step_supports) CHECK(s == search_shared_support(problem, 2, SearchStrategy::GreedySwap).shared_support);
  CHECK(search_free_supports(problem, 8).distinct_supports == 1);

  // Term swap halfway along the axis.
  Eigen::MatrixXd two(8, 2);
  two.setZero();
  two(1, 0) = 1.0;
  two(3, 0) = 1.0;
  two(1, 1) = 1.0;
  two(6, 1) = 1.0;
  CandidateLibrary tr = random_library(8, 40, 6, two, 1e-3, 31);
  CandidateLibrary va = random_library(8, 20, 6, two, 1e-3, 32);
  // random_library alternates columns; reorder steps into two contiguous regimes.
  auto regroup = [](CandidateLibrary lib) {
    CandidateLibrary out = lib;
    const std::vector<std::size_t> order{0, 2, 4, 1, 3, 5};
    for (std::size_t i = 0; i < 6; ++i) {
      out.steps[i] = lib.steps[order[i]];
      out.targets[i] = lib.targets[order[i]];
    }
    return out;
  };
  const SubsetSolution regimes = search_free_supports(SubsetProblem(regroup(tr), regroup(va)), 2);
  CHECK(regimes.distinct_supports == 2);
  CHECK(regimes.step_supports.front() == Support{1, 3});
  CHECK(regimes.step_supports.back() == Support{1, 6});
}
