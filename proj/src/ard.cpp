#include "parapde/ard.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "parapde/errors.hpp"

namespace parapde {

namespace {

struct PosteriorState {
  Eigen::MatrixXd cov;
  Eigen::VectorXd mean;
  double log_det_precision = 0.0;
};

PosteriorState posterior(const Eigen::MatrixXd& gram, const Eigen::VectorXd& aty,
                         const Eigen::VectorXd& alpha, double beta) {
  Eigen::MatrixXd precision = beta * gram;
  precision.diagonal() += alpha;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError("ard_fit: posterior precision is not positive definite");
  PosteriorState s;
  s.cov = llt.solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  s.mean = beta * s.cov * aty;
  s.log_det_precision = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  return s;
}

double evidence(double n, double rss, const Eigen::VectorXd& mean, const Eigen::VectorXd& alpha,
                double beta, double log_det_precision) {
  return 0.5 * (alpha.array().log().sum() + n * std::log(beta) - beta * rss -
                (alpha.array() * mean.array().square()).sum() - log_det_precision -
                n * std::log(2.0 * std::numbers::pi));
}

}  // namespace

double ard_log_evidence(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                        const Eigen::VectorXd& alpha, double beta) {
  const Eigen::MatrixXd gram = design.transpose() * design;
  const PosteriorState s = posterior(gram, design.transpose() * target, alpha, beta);
  const double rss = (target - design * s.mean).squaredNorm();
  return evidence(static_cast<double>(design.rows()), rss, s.mean, alpha, beta, s.log_det_precision);
}

ArdPosterior ard_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                     const ArdOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index s = design.cols();
  if (s < 1 || n <= s) throw ConfigError("ard_fit needs n > s >= 1");
  if (!design.allFinite() || !target.allFinite()) throw DataError("ard_fit: non-finite input");
  const double mean_y = target.mean();
  const double var_y = (target.array() - mean_y).square().mean();
  if (!(var_y > 0.0)) throw DataError("ard_fit: degenerate target (zero variance)");

  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::VectorXd aty = design.transpose() * target;
  const double dn = static_cast<double>(n);
  const double rss_floor = std::max(1e-24 * target.squaredNorm(), std::numeric_limits<double>::min());

  ArdPosterior post;
  post.alpha = Eigen::VectorXd::Constant(s, options.fixed_alpha.value_or(1.0));
  post.beta = 1.0 / var_y;

  for (int it = 1; it <= options.max_iter; ++it) {
    const PosteriorState st = posterior(gram, aty, post.alpha, post.beta);
    const double rss = std::max((target - design * st.mean).squaredNorm(), rss_floor);
    const Eigen::VectorXd gamma = (1.0 - post.alpha.array() * st.cov.diagonal().array()).matrix();

    Eigen::VectorXd alpha_new = post.alpha;
    if (!options.fixed_alpha) {
      for (Eigen::Index j = 0; j < s; ++j) {
        const double m2 = st.mean(j) * st.mean(j);
        const double a = m2 > 0.0 ? gamma(j) / m2 : options.alpha_cap;
        alpha_new(j) = std::clamp(a, 1e-300, options.alpha_cap);
      }
    }
    const double beta_new = std::max(dn - gamma.sum(), 1e-12) / rss;

    double change = std::abs(beta_new - post.beta) / post.beta;
    for (Eigen::Index j = 0; j < s; ++j)
      change = std::max(change, std::abs(alpha_new(j) - post.alpha(j)) / post.alpha(j));

    post.alpha = alpha_new;
    post.beta = beta_new;
    post.iterations = it;
    {
      const PosteriorState after = posterior(gram, aty, post.alpha, post.beta);
      const double r = (target - design * after.mean).squaredNorm();
      post.log_evidence.push_back(evidence(dn, r, after.mean, post.alpha, post.beta, after.log_det_precision));
    }
    if (change < options.tol) {
      post.converged = true;
      break;
    }
  }

  const PosteriorState fin = posterior(gram, aty, post.alpha, post.beta);
  post.mean = fin.mean;
  post.covariance = fin.cov;
  post.std = fin.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return post;
}

InstabilityRatio instability_ratio(const ArdPosterior& posterior, const Eigen::VectorXd* coefficients) {
  const Eigen::VectorXd& coef = coefficients ? *coefficients : posterior.mean;
  const double l1 = coef.cwiseAbs().sum();
  if (!(l1 > 0.0) || !std::isfinite(l1)) return {kInstabilitySentinel, true};
  return {posterior.std.sum() / l1, false};
}

std::vector<UncertaintyReport> accumulate_uncertainty(const SubsetPath& path,
                                                      const CandidateLibrary& train,
                                                      const UncertaintyOptions& options) {
  if (path.solutions.empty()) throw ConfigError("accumulate_uncertainty: empty path");
  const std::size_t n_steps = train.n_steps();
  if (options.trim_low + options.trim_high >= n_steps)
    throw ConfigError("uncertainty trim removes every step");

  std::vector<UncertaintyReport> reports;
  for (const SubsetSolution& sol : path.solutions) {
    UncertaintyReport rep;
    rep.support_size = sol.support_size;
    rep.per_step_ratios.assign(n_steps, 0.0);
    rep.sentinel_steps.assign(n_steps, false);
    rep.posterior_mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(train.n_terms()), static_cast<Eigen::Index>(n_steps));
    rep.posterior_std = rep.posterior_mean;

    for (std::size_t i = 0; i < n_steps; ++i) {
      const Support& support = sol.step_supports[i];
      Eigen::MatrixXd a(train.steps[i].rows(), static_cast<Eigen::Index>(support.size()));
      for (std::size_t c = 0; c < support.size(); ++c)
        a.col(static_cast<Eigen::Index>(c)) = train.steps[i].col(static_cast<Eigen::Index>(support[c]));

      InstabilityRatio ratio;
      try {
        const ArdPosterior post = ard_fit(a, train.targets[i], options.ard);
        if (options.coefficients == RatioCoefficients::Ols) {
          Eigen::VectorXd ols(static_cast<Eigen::Index>(support.size()));
          for (std::size_t c = 0; c < support.size(); ++c)
            ols(static_cast<Eigen::Index>(c)) = sol.coefficients(static_cast<Eigen::Index>(support[c]), static_cast<Eigen::Index>(i));
          ratio = instability_ratio(post, &ols);
        } else {
          ratio = instability_ratio(post);
        }
        for (std::size_t c = 0; c < support.size(); ++c) {
          rep.posterior_mean(static_cast<Eigen::Index>(support[c]), static_cast<Eigen::Index>(i)) = post.mean(static_cast<Eigen::Index>(c));
          rep.posterior_std(static_cast<Eigen::Index>(support[c]), static_cast<Eigen::Index>(i)) = post.std(static_cast<Eigen::Index>(c));
        }
      } catch (const DataError&) {
        // Degenerate (constant) targets count as totally unstable.
        ratio = {kInstabilitySentinel, true};
      } catch (const Error& e) {
        std::ostringstream msg;
        msg << "support size " << sol.support_size << ", step " << i << ": " << e.what();
        throw NumericalError(msg.str());
      }
      rep.per_step_ratios[i] = ratio.value;
      rep.sentinel_steps[i] = ratio.sentinel;
    }
    for (std::size_t i = options.trim_low; i < n_steps - options.trim_high; ++i) rep.V += rep.per_step_ratios[i];
    reports.push_back(std::move(rep));
  }

  double v_max = 0.0;
  for (const auto& r : reports) v_max = std::max(v_max, r.V);
  for (auto& r : reports) r.V_bar = v_max > 0.0 ? r.V / v_max : 1.0;
  return reports;
}

}  // namespace parapde
