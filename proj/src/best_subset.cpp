#include "parapde/best_subset.hpp"

#include <sstream>

#include "parapde/errors.hpp"

namespace parapde {

namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kRidgeFactor = 1e-8;

std::uint64_t support_key(std::span<const std::size_t> support) {
  std::uint64_t key = 0;
  for (std::size_t j : support) key |= std::uint64_t{1} << j;
  return key;
}

Eigen::MatrixXd restrict_gram(const Eigen::MatrixXd& g, std::span<const std::size_t> s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      out(a, b) = g(static_cast<Eigen::Index>(s[static_cast<std::size_t>(a)]),
                    static_cast<Eigen::Index>(s[static_cast<std::size_t>(b)]));
  return out;
}

Eigen::VectorXd restrict_vec(const Eigen::VectorXd& v, std::span<const std::size_t> s) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(s.size()));
  for (std::size_t a = 0; a < s.size(); ++a) out(static_cast<Eigen::Index>(a)) = v(static_cast<Eigen::Index>(s[a]));
  return out;
}

// Solves the normalised normal equations with the ridge fallback. The
// condition estimate comes from the Cholesky diagonal.
Eigen::VectorXd solve_normal(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, bool* flagged) {
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const Eigen::VectorXd d = Eigen::MatrixXd(llt.matrixL()).diagonal();
    const double lo = d.minCoeff(), hi = d.maxCoeff();
    ok = lo > 0.0 && (hi / lo) * (hi / lo) <= kMaxCondition;
  }
  if (ok) {
    if (flagged) *flagged = false;
    return llt.solve(rhs);
  }
  if (flagged) *flagged = true;
  Eigen::MatrixXd reg = gram;
  const double ridge = kRidgeFactor * std::max(gram.trace(), 1e-300) / static_cast<double>(gram.rows());
  reg.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
  if (ldlt.info() == Eigen::Success) return ldlt.solve(rhs);
  return reg.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace

std::string to_string(SearchStrategy s) {
  return s == SearchStrategy::Exhaustive ? "exhaustive" : "greedy_swap";
}
std::string to_string(SupportMode m) { return m == SupportMode::Shared ? "shared" : "free"; }

SearchStrategy parse_strategy(const std::string& s) {
  if (s == "exhaustive") return SearchStrategy::Exhaustive;
  if (s == "greedy_swap" || s == "greedy") return SearchStrategy::GreedySwap;
  throw ConfigError("unknown search strategy '" + s + "' (expected exhaustive or greedy_swap)");
}

SupportMode parse_support_mode(const std::string& s) {
  if (s == "shared") return SupportMode::Shared;
  if (s == "free") return SupportMode::Free;
  throw ConfigError("unknown support mode '" + s + "' (expected shared or free)");
}

OlsFit fit_subset_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                      std::span<const std::size_t> support) {
  if (support.empty()) throw ConfigError("fit_subset_ols: empty support");
  const auto n = static_cast<Eigen::Index>(support.size());
  if (n > design.rows()) throw ConfigError("fit_subset_ols: support larger than the number of samples");

  Eigen::MatrixXd a(design.rows(), n);
  Eigen::VectorXd scale(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    a.col(c) = design.col(static_cast<Eigen::Index>(support[static_cast<std::size_t>(c)]));
    const double norm = a.col(c).norm();
    scale(c) = norm > 0.0 ? norm : 1.0;
    a.col(c) /= scale(c);
  }

  OlsFit fit;
  const Eigen::MatrixXd gram = a.transpose() * a;
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues();
  const double cond = ev(0) > 0.0 ? ev(n - 1) / ev(0) : std::numeric_limits<double>::infinity();
  Eigen::VectorXd c;
  if (cond <= kMaxCondition) {
    c = a.colPivHouseholderQr().solve(target);
  } else {
    fit.ridge_fallback = true;
    Eigen::MatrixXd reg = gram;
    reg.diagonal().array() += kRidgeFactor * std::max(gram.trace(), 1e-300) / static_cast<double>(n);
    c = reg.ldlt().solve(a.transpose() * target);
  }
  fit.coefficients = c.cwiseQuotient(scale);
  return fit;
}

SubsetProblem::SubsetProblem(const CandidateLibrary& train, const CandidateLibrary& validation)
    : train_(&train), validation_(&validation), n_terms_(train.n_terms()) {
  if (train.n_steps() != validation.n_steps() || train.n_terms() != validation.n_terms())
    throw DataError("train and validation libraries are not aligned");
  if (n_terms_ > 64) throw ConfigError("at most 64 candidate terms are supported");
  steps_.resize(train.n_steps());
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    const Eigen::MatrixXd& q = train.steps[i];
    const Eigen::VectorXd& y = train.targets[i];
    Eigen::VectorXd scale = q.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < scale.size(); ++j)
      if (!(scale(j) > 0.0)) scale(j) = 1.0;
    const Eigen::MatrixXd qn = q * scale.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd vn = validation.steps[i] * scale.cwiseInverse().asDiagonal();
    StepSystem& s = steps_[i];
    s.gram = qn.transpose() * qn;
    s.rhs = qn.transpose() * y;
    s.yty = y.squaredNorm();
    s.val_gram = vn.transpose() * vn;
    s.val_rhs = vn.transpose() * validation.targets[i];
    s.val_yty = validation.targets[i].squaredNorm();
  }
}

double SubsetProblem::step_validation_rss(std::size_t step, std::span<const std::size_t> support) const {
  const StepSystem& s = steps_[step];
  if (support.empty()) return s.val_yty;
  const Eigen::VectorXd c = solve_normal(restrict_gram(s.gram, support), restrict_vec(s.rhs, support), nullptr);
  const double rss = s.val_yty - 2.0 * c.dot(restrict_vec(s.val_rhs, support)) +
                     c.dot(restrict_gram(s.val_gram, support) * c);
  return std::max(rss, 0.0);
}

double SubsetProblem::total_validation_rss(std::span<const std::size_t> support) const {
  const std::uint64_t key = support_key(support);
  if (auto it = total_cache_.find(key); it != total_cache_.end()) return it->second;
  double total = 0.0;
  for (std::size_t i = 0; i < steps_.size(); ++i) total += step_validation_rss(i, support);
  total_cache_.emplace(key, total);
  return total;
}

SubsetSolution SubsetProblem::assemble(std::size_t support_size, SupportMode mode,
                                       const std::vector<Support>& step_supports) const {
  SubsetSolution sol;
  sol.support_size = support_size;
  sol.mode = mode;
  sol.step_supports = step_supports;
  const std::size_t n = steps_.size();
  sol.coefficients = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_terms_), static_cast<Eigen::Index>(n));
  sol.per_step_train_rss.resize(n);
  sol.per_step_validation_rss.resize(n);
  sol.ridge_flags.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const Support& s = step_supports[i];
    if (s.size() != support_size) throw DataError("support size mismatch in assembled solution");
    const OlsFit fit = fit_subset_ols(train_->steps[i], train_->targets[i], s);
    sol.ridge_flags[i] = fit.ridge_fallback;
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_terms_));
    for (std::size_t a = 0; a < s.size(); ++a) full(static_cast<Eigen::Index>(s[a])) = fit.coefficients(static_cast<Eigen::Index>(a));
    sol.coefficients.col(static_cast<Eigen::Index>(i)) = full;
    sol.per_step_train_rss[i] = (train_->targets[i] - train_->steps[i] * full).squaredNorm();
    sol.per_step_validation_rss[i] = (validation_->targets[i] - validation_->steps[i] * full).squaredNorm();
    sol.train_rss += sol.per_step_train_rss[i];
    sol.validation_rss += sol.per_step_validation_rss[i];
  }

  std::vector<Support> distinct = step_supports;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  sol.distinct_supports = distinct.size();
  if (mode == SupportMode::Shared && !step_supports.empty()) sol.shared_support = step_supports.front();
  return sol;
}

SubsetSolution search_shared_support(const SubsetProblem& problem, std::size_t support_size,
                                     SearchStrategy strategy) {
  const std::size_t nq = problem.n_terms();
  if (support_size < 1 || support_size > nq) {
    std::ostringstream msg;
    msg << "support size " << support_size << " outside 1.." << nq;
    throw ConfigError(msg.str());
  }

  Support best;
  if (strategy == SearchStrategy::Exhaustive) {
    // Lexicographic enumeration; strict improvement keeps the lowest indices on ties.
    Support comb(support_size);
    for (std::size_t a = 0; a < support_size; ++a) comb[a] = a;
    double best_score = std::numeric_limits<double>::infinity();
    while (true) {
      const double s = problem.total_validation_rss(comb);
      if (s < best_score) {
        best_score = s;
        best = comb;
      }
      std::size_t pos = support_size;
      while (pos > 0 && comb[pos - 1] == nq - support_size + pos - 1) --pos;
      if (pos == 0) break;
      ++comb[pos - 1];
      for (std::size_t a = pos; a < support_size; ++a) comb[a] = comb[a - 1] + 1;
    }
  } else {
    best = greedy_swap_search(nq, support_size,
                              [&](const Support& s) { return problem.total_validation_rss(s); });
  }
  return problem.assemble(support_size, SupportMode::Shared,
                          std::vector<Support>(problem.n_steps(), best));
}

SubsetSolution search_free_supports(const SubsetProblem& problem, std::size_t support_size) {
  const std::size_t nq = problem.n_terms();
  if (support_size < 1 || support_size > nq) throw ConfigError("support size out of range");
  std::vector<Support> supports(problem.n_steps());
  for (std::size_t i = 0; i < problem.n_steps(); ++i) {
    std::unordered_map<std::uint64_t, double> cache;
    supports[i] = greedy_swap_search(nq, support_size, [&](const Support& s) {
      const std::uint64_t key = support_key(s);
      if (auto it = cache.find(key); it != cache.end()) return it->second;
      const double v = problem.step_validation_rss(i, s);
      cache.emplace(key, v);
      return v;
    });
  }
  return problem.assemble(support_size, SupportMode::Free, supports);
}

SubsetPath build_path(const SubsetProblem& problem, std::size_t s_max, SupportMode mode,
                      SearchStrategy strategy) {
  if (s_max < 1 || s_max > problem.n_terms()) throw ConfigError("s_max must be in 1..N_q");
  SubsetPath path;
  for (std::size_t s = 1; s <= s_max; ++s) {
    path.solutions.push_back(mode == SupportMode::Shared ? search_shared_support(problem, s, strategy)
                                                         : search_free_supports(problem, s));
  }
  return path;
}

}  // namespace parapde
