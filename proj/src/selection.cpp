#include "parapde/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "parapde/errors.hpp"

namespace parapde {

namespace {

// Midranks of the pooled sample; also returns the tie-correction sum.
std::vector<double> midranks(const std::vector<double>& pooled, double* tie_sum) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(n);
  double ties = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  if (tie_sum) *tie_sum = ties;
  return ranks;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

CriterionScore information_criteria(double rss, std::size_t n_samples, double complexity,
                                    double uncertainty) {
  if (!std::isfinite(rss) || rss < 0.0) throw NumericalError("information criteria: invalid rss");
  if (n_samples == 0) throw ConfigError("information criteria: no samples");
  const double n = static_cast<double>(n_samples);
  const double loglik_term = n * std::log(2.0 * std::numbers::pi * rss / n + kZeta);
  CriterionScore s;
  s.rss = rss;
  s.n_samples = n_samples;
  s.complexity = complexity;
  s.uncertainty = uncertainty;
  s.aic = loglik_term + 2.0 * complexity;
  const double denom = n - complexity - 1.0;
  if (denom <= 0.0) {
    s.aicc = std::numeric_limits<double>::infinity();
    s.aicc_undefined = true;
  } else {
    s.aicc = s.aic + 2.0 * complexity * (complexity + 1.0) / denom;
  }
  s.bic = loglik_term + std::log(n) * complexity;
  s.ubic = s.bic + std::log(n) * uncertainty;
  return s;
}

std::vector<Eigen::VectorXd> model_profiles(const SubsetSolution& solution, const CandidateLibrary& library) {
  if (static_cast<std::size_t>(solution.coefficients.cols()) != library.n_steps())
    throw DataError("solution and library step counts differ");
  std::vector<Eigen::VectorXd> out;
  out.reserve(library.n_steps());
  for (std::size_t i = 0; i < library.n_steps(); ++i)
    out.push_back(library.steps[i] * solution.coefficients.col(static_cast<Eigen::Index>(i)));
  return out;
}

std::vector<CriterionScore> criterion_scores(const SubsetPath& path,
                                             std::span<const UncertaintyReport> uncertainty,
                                             const CandidateLibrary& library, TransformId transform,
                                             double lambda) {
  if (!uncertainty.empty() && uncertainty.size() != path.solutions.size())
    throw ConfigError("uncertainty reports are not aligned with the path");
  std::vector<CriterionScore> out;
  for (std::size_t k = 0; k < path.solutions.size(); ++k) {
    const SubsetSolution& sol = path.solutions[k];
    const auto model = model_profiles(sol, library);
    const double rss = generalized_rss(library.targets, model, library.sample_spacing, transform);
    if (!std::isfinite(rss)) throw NumericalError("non-finite rss at support size " + std::to_string(sol.support_size));
    const std::size_t n = transform == TransformId::PsdIntegrated ? library.n_steps()
                                                                  : library.n_steps() * library.n_samples();
    double complexity = static_cast<double>(sol.support_size);
    if (sol.mode == SupportMode::Free) complexity *= static_cast<double>(sol.distinct_supports);
    double v = 0.0, v_bar = 0.0;
    if (!uncertainty.empty()) {
      v = uncertainty[k].V;
      v_bar = uncertainty[k].V_bar;
    }
    CriterionScore s = information_criteria(rss, n, complexity, std::pow(10.0, lambda) * v_bar);
    s.support_size = sol.support_size;
    s.V = v;
    s.V_bar = v_bar;
    s.transform_id = transform;
    out.push_back(s);
  }
  return out;
}

MannWhitneyResult mann_whitney_less(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("mann_whitney_less needs at least one sample per group");
  const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());

  MannWhitneyResult res;
  if (std::all_of(pooled.begin(), pooled.end(), [&](double v) { return v == pooled[0]; })) {
    res.all_tied = true;
    res.p_value = 0.5;
    res.u_statistic = 0.5 * static_cast<double>(n1 * n2);
    return res;
  }

  double tie_sum = 0.0;
  const std::vector<double> ranks = midranks(pooled, &tie_sum);
  const double offset = 0.5 * static_cast<double>(n1 * (n1 + 1));
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n1; ++i) rank_sum += ranks[i];
  res.u_statistic = rank_sum - offset;

  if (n1 <= 10 && n2 <= 10) {
    // Enumerate every assignment of n1 pooled positions to the first group.
    res.exact = true;
    std::vector<std::size_t> comb(n1);
    std::iota(comb.begin(), comb.end(), std::size_t{0});
    std::size_t total = 0, at_most = 0;
    const double eps = 1e-9;
    while (true) {
      double s = 0.0;
      for (std::size_t c : comb) s += ranks[c];
      ++total;
      if (s - offset <= res.u_statistic + eps) ++at_most;
      std::size_t pos = n1;
      while (pos > 0 && comb[pos - 1] == n - n1 + pos - 1) --pos;
      if (pos == 0) break;
      ++comb[pos - 1];
      for (std::size_t k = pos; k < n1; ++k) comb[k] = comb[k - 1] + 1;
    }
    res.p_value = static_cast<double>(at_most) / static_cast<double>(total);
    return res;
  }

  const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2), dn = static_cast<double>(n);
  const double mean = 0.5 * dn1 * dn2;
  const double var = dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_sum / (dn * (dn - 1.0)));
  if (!(var > 0.0)) {
    res.all_tied = true;
    res.p_value = 0.5;
    return res;
  }
  const double z = (res.u_statistic - mean + 0.5) / std::sqrt(var);
  res.p_value = std::clamp(normal_cdf(z), 0.0, 1.0);
  return res;
}

Eigen::MatrixXd per_step_bic(const SubsetPath& path, const CandidateLibrary& library) {
  const std::size_t n_steps = library.n_steps();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(path.solutions.size()), static_cast<Eigen::Index>(n_steps));
  std::vector<Psd> target_psd;
  target_psd.reserve(n_steps);
  std::vector<double> scale;
  for (const auto& y : library.targets) {
    target_psd.push_back(step_psd({y.data(), static_cast<std::size_t>(y.size())}, library.sample_spacing));
    double ms = 0.0;
    for (double p : target_psd.back().power) ms += p * p;
    scale.push_back(ms / static_cast<double>(target_psd.back().power.size()));
  }

  for (std::size_t k = 0; k < path.solutions.size(); ++k) {
    const auto model = model_profiles(path.solutions[k], library);
    const double complexity = static_cast<double>(path.solutions[k].support_size);
    for (std::size_t i = 0; i < n_steps; ++i) {
      const Psd m = step_psd({model[i].data(), static_cast<std::size_t>(model[i].size())}, library.sample_spacing);
      double rss = 0.0;
      for (std::size_t f = 0; f < m.power.size(); ++f) {
        const double d = target_psd[i].power[f] - m.power[f];
        rss += d * d;
      }
      // Relative to the target's mean-square power, so zeta acts as a
      // relative floor whatever the units of u_t.
      if (scale[i] > 0.0) rss /= scale[i];
      out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          information_criteria(rss, m.power.size(), complexity, 0.0).bic;
    }
  }
  return out;
}

FilterReport filter_support_sizes(std::span<const std::size_t> sizes, std::span<const double> global_bic,
                                  const Eigen::MatrixXd& per_step) {
  const std::size_t m = sizes.size();
  if (m == 0) throw ConfigError("filter_support_sizes: empty path");
  if (global_bic.size() != m || static_cast<std::size_t>(per_step.rows()) != m)
    throw ConfigError("filter_support_sizes: inputs are not aligned");

  FilterReport rep;
  rep.sizes.assign(sizes.begin(), sizes.end());
  rep.global_bic.assign(global_bic.begin(), global_bic.end());
  rep.per_step_bic = per_step;

  std::vector<std::vector<double>> rows(m);
  for (std::size_t k = 0; k < m; ++k) {
    rows[k].resize(static_cast<std::size_t>(per_step.cols()));
    for (Eigen::Index i = 0; i < per_step.cols(); ++i) rows[k][static_cast<std::size_t>(i)] = per_step(static_cast<Eigen::Index>(k), i);
  }

  std::vector<double> strong;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double p = mann_whitney_less(rows[k + 1], rows[k]).p_value;
    rep.consecutive_p.push_back(p);
    if (p < 0.01) strong.push_back(p);
  }
  if (!strong.empty()) {
    std::sort(strong.begin(), strong.end());
    const std::size_t h = strong.size() / 2;
    rep.p_cut = strong.size() % 2 ? strong[h] : 0.5 * (strong[h - 1] + strong[h]);
  }

  rep.reference_p.assign(m, std::numeric_limits<double>::quiet_NaN());
  rep.reference_size.assign(m, sizes[0]);
  rep.significant_sizes.push_back(sizes[0]);
  for (std::size_t k = 1; k < m; ++k) {
    std::size_t ref = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (global_bic[j] < global_bic[ref]) ref = j;
    const double p = mann_whitney_less(rows[k], rows[ref]).p_value;
    rep.reference_p[k] = p;
    rep.reference_size[k] = sizes[ref];
    if (global_bic[k] < global_bic[ref] && p <= rep.p_cut) rep.significant_sizes.push_back(sizes[k]);
  }
  return rep;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 16; ++i) g.push_back(0.25 * i);
  return g;
}

LambdaSelection tune_lambda_star(std::span<const std::size_t> sizes, std::span<const double> bic,
                                 std::span<const double> v_bar, std::size_t n_samples,
                                 std::span<const std::size_t> significant_sizes,
                                 std::span<const double> lambda_grid) {
  if (significant_sizes.empty()) throw ConfigError("tune_lambda_star: no significant sizes");
  if (lambda_grid.empty()) throw ConfigError("tune_lambda_star: empty lambda grid");
  if (bic.size() != sizes.size() || v_bar.size() != sizes.size())
    throw ConfigError("tune_lambda_star: inputs are not aligned");
  const double log_n = std::log(static_cast<double>(n_samples));

  std::vector<std::size_t> candidates;
  for (std::size_t s : significant_sizes) {
    const auto it = std::find(sizes.begin(), sizes.end(), s);
    if (it == sizes.end()) throw ConfigError("significant size not on the path");
    candidates.push_back(static_cast<std::size_t>(it - sizes.begin()));
  }

  LambdaSelection sel;
  for (double lambda : lambda_grid) {
    const double w = std::pow(10.0, lambda);
    std::size_t best = candidates[0];
    double best_score = bic[best] + log_n * w * v_bar[best];
    for (std::size_t c : candidates) {
      const double score = bic[c] + log_n * w * v_bar[c];
      if (score < best_score || (score == best_score && sizes[c] < sizes[best])) {
        best = c;
        best_score = score;
      }
    }
    sel.argmin_per_lambda.push_back(sizes[best]);
  }

  const std::size_t last = sel.argmin_per_lambda.back();
  std::size_t start = lambda_grid.size() - 1;
  while (start > 0 && sel.argmin_per_lambda[start - 1] == last) --start;
  sel.lambda_star = lambda_grid[start];
  sel.selected_size = last;
  sel.unstable = lambda_grid.size() > 1 && start == lambda_grid.size() - 1;
  return sel;
}

SelectionReport select_model(const SubsetPath& path, std::span<const UncertaintyReport> uncertainty,
                             const CandidateLibrary& library, std::span<const double> lambda_grid,
                             TransformId transform) {
  if (path.solutions.empty()) throw ConfigError("select_model: empty path");
  if (uncertainty.size() != path.solutions.size()) throw ConfigError("select_model: uncertainty not aligned");

  SelectionReport rep;
  const auto base = criterion_scores(path, uncertainty, library, transform, 0.0);
  std::vector<std::size_t> sizes;
  std::vector<double> bic, v_bar;
  for (const auto& s : base) {
    sizes.push_back(s.support_size);
    bic.push_back(s.bic);
    v_bar.push_back(s.V_bar);
  }

  rep.filter = filter_support_sizes(sizes, bic, per_step_bic(path, library));
  rep.lambda = tune_lambda_star(sizes, bic, v_bar, base.front().n_samples, rep.filter.significant_sizes, lambda_grid);
  rep.selected_size = rep.lambda.selected_size;
  rep.selected_index = static_cast<std::size_t>(std::find(sizes.begin(), sizes.end(), rep.selected_size) - sizes.begin());
  rep.scores = criterion_scores(path, uncertainty, library, TransformId::PsdIntegrated, rep.lambda.lambda_star);
  rep.identity_scores = criterion_scores(path, uncertainty, library, TransformId::Identity, rep.lambda.lambda_star);

  const UncertaintyReport& u = uncertainty[rep.selected_index];
  const SubsetSolution& sol = path.solutions[rep.selected_index];
  for (std::size_t i = 0; i < sol.step_supports.size(); ++i) {
    for (std::size_t term : sol.step_supports[i]) {
      rep.bands.push_back({i, term, u.posterior_mean(static_cast<Eigen::Index>(term), static_cast<Eigen::Index>(i)),
                           u.posterior_std(static_cast<Eigen::Index>(term), static_cast<Eigen::Index>(i))});
    }
  }
  return rep;
}

}  // namespace parapde
