#include "parapde/coeff_fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "parapde/errors.hpp"

namespace parapde {

namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct LsResult {
  std::vector<double> weights;
  double rss = std::numeric_limits<double>::infinity();
};

LsResult least_squares(std::span<const double> y, std::span<const double> x, const std::vector<BasisAtom>& atoms) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto m = static_cast<Eigen::Index>(atoms.size());
  if (m == 0) {
    LsResult r;
    r.rss = 0.0;
    for (double v : y) r.rss += v * v;
    return r;
  }
  Eigen::MatrixXd a(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) = atoms[static_cast<std::size_t>(j)](x[static_cast<std::size_t>(i)]);
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const Eigen::VectorXd w = a.colPivHouseholderQr().solve(yv);
  LsResult r;
  r.weights.assign(w.data(), w.data() + w.size());
  r.rss = (yv - a * w).squaredNorm();
  if (!std::isfinite(r.rss)) r.rss = std::numeric_limits<double>::infinity();
  return r;
}

int parameter_count(const std::vector<BasisAtom>& atoms) {
  int k = 0;
  for (const auto& a : atoms) k += 1 + a.nonlinear_parameters();
  return k;
}

double bic_of(double rss, std::size_t n, int params, double floor) {
  const double dn = static_cast<double>(n);
  return dn * std::log(rss / dn + floor) + std::log(dn) * params;
}

// BIC with the likelihood and penalty counted over n_eff independent samples.
double bic_eff(double rss, std::size_t n, double n_eff, int params, double floor) {
  return n_eff * std::log(rss / static_cast<double>(n) + floor) + std::log(n_eff) * params;
}

double effective_samples(std::span<const double> y, std::span<const double> x, const std::vector<BasisAtom>& atoms,
                         const std::vector<double>& weights) {
  const std::size_t n = y.size();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j) m += weights[j] * atoms[j](x[i]);
    r[i] = y[i] - m;
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    den += r[i] * r[i];
    if (i + 1 < n) num += r[i] * r[i + 1];
  }
  const double rho = den > 0.0 ? std::clamp(num / den, 0.0, 0.99) : 0.0;
  return std::max(2.0, static_cast<double>(n) * (1.0 - rho) / (1.0 + rho));
}

// Golden-section minimisation of f on [lo, hi].
template <typename F>
double golden(F&& f, double lo, double hi, int iters = 40) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc <= fd) {
      b = d; d = c; fd = fc;
      c = b - g * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + g * (b - a); fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    v[static_cast<std::size_t>(i)] = count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return v;
}

// Neighbouring grid values around `value` (clamped to the grid ends).
std::pair<double, double> bracket(const std::vector<double>& grid, double value) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), value);
  const std::size_t i = static_cast<std::size_t>(it - grid.begin());
  const double lo = i == 0 ? grid.front() : grid[i - 1];
  const double hi = i + 1 >= grid.size() ? grid.back() : grid[i + 1];
  return {lo, hi};
}

// --- tiny parser for the canonical grammar ---------------------------------

class ExprParser {
 public:
  ExprParser(const std::string& s, const std::string& var, double x) : s_(s), var_(var), x_(x) {}

  double parse() {
    double total = 0.0;
    skip();
    double sign = 1.0;
    if (peek('-')) {
      ++pos_;
      sign = -1.0;
    }
    total += sign * term();
    while (true) {
      skip();
      if (pos_ >= s_.size()) break;
      if (peek('+')) sign = 1.0;
      else if (peek('-')) sign = -1.0;
      else fail("expected + or -");
      ++pos_;
      total += sign * term();
    }
    return total;
  }

 private:
  double term() {
    skip();
    const double w = number();
    skip();
    if (!peek('*')) return w;
    ++pos_;
    skip();
    if (match("sin(")) {
      const double om = number();
      expect("*");
      expect_var();
      expect(")");
      return w * std::sin(om * x_);
    }
    if (match("cos(")) {
      const double om = number();
      expect("*");
      expect_var();
      expect(")");
      return w * std::cos(om * x_);
    }
    if (match("exp(-((")) {
      expect_var();
      skip();
      double sign = 0.0;
      if (peek('-')) sign = 1.0;
      else if (peek('+')) sign = -1.0;
      else fail("expected sign in gaussian");
      ++pos_;
      const double c = sign * number();
      expect(")/");
      const double width = number();
      expect(")^2)");
      const double z = (x_ - c) / width;
      return w * std::exp(-z * z);
    }
    expect_var();
    return w * x_;
  }

  double number() {
    skip();
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }

  void skip() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }
  bool peek(char c) const { return pos_ < s_.size() && s_[pos_] == c; }
  bool match(const std::string& tok) {
    skip();
    if (s_.compare(pos_, tok.size(), tok) == 0) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }
  void expect(const std::string& tok) {
    if (!match(tok)) fail("expected '" + tok + "'");
  }
  void expect_var() { expect(var_); }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("expression parse error at " + std::to_string(pos_) + ": " + what + " in '" + s_ + "'");
  }

  const std::string& s_;
  const std::string& var_;
  double x_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(AtomKind k) {
  switch (k) {
    case AtomKind::Constant: return "constant";
    case AtomKind::Linear: return "linear";
    case AtomKind::Sine: return "sine";
    case AtomKind::Cosine: return "cosine";
    case AtomKind::Gaussian: return "gaussian";
  }
  return "unknown";
}

double BasisAtom::operator()(double x) const {
  switch (kind) {
    case AtomKind::Constant: return 1.0;
    case AtomKind::Linear: return x;
    case AtomKind::Sine: return std::sin(omega * x);
    case AtomKind::Cosine: return std::cos(omega * x);
    case AtomKind::Gaussian: {
      const double z = (x - center) / width;
      return std::exp(-z * z);
    }
  }
  return 0.0;
}

int BasisAtom::nonlinear_parameters() const {
  switch (kind) {
    case AtomKind::Sine:
    case AtomKind::Cosine: return 1;
    case AtomKind::Gaussian: return 2;
    default: return 0;
  }
}

double CoefficientFit::evaluate(double x) const {
  double v = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) v += weights[i] * atoms[i](x);
  return v;
}

std::vector<double> CoefficientFit::evaluate(std::span<const double> xs) const {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = evaluate(xs[i]);
  return out;
}

CoefficientFit fit_expression(std::span<const double> trajectory, std::span<const double> axis_values,
                              const CoefficientFitOptions& opt) {
  if (trajectory.size() != axis_values.size()) throw ConfigError("fit_expression: length mismatch");
  if (trajectory.size() < 4) throw ConfigError("fit_expression: need at least 4 samples");
  if (opt.max_atoms < 1 || opt.max_atoms > 3) throw ConfigError("fit_expression: max_atoms must be in 1..3");
  for (double v : trajectory)
    if (!std::isfinite(v)) throw DataError("fit_expression: non-finite trajectory");

  const std::size_t n = trajectory.size();
  const double lo = *std::min_element(axis_values.begin(), axis_values.end());
  const double hi = *std::max_element(axis_values.begin(), axis_values.end());
  const double length = hi - lo;
  if (!(length > 0.0)) throw ConfigError("fit_expression: degenerate axis");

  double mean_sq = 0.0;
  for (double v : trajectory) mean_sq += v * v;
  mean_sq /= static_cast<double>(n);

  CoefficientFit fit;
  if (mean_sq == 0.0) {
    fit.atoms = {BasisAtom{AtomKind::Constant}};
    fit.weights = {0.0};
    fit.expression = format_expression(fit, opt.variable);
    return fit;
  }
  // Relative floor on the per-sample residual variance so roundoff in exact
  // fits cannot buy extra atoms.
  const double floor = 1e-14 * mean_sq;

  // Below half a cycle a cosine is nearly collinear with the constant atom.
  const double cosine_min_omega = 2.0 * std::numbers::pi * opt.min_cosine_cycles / length;
  const std::vector<double> omegas = [&] {
    auto cyc = log_spaced(opt.min_cycles, opt.max_cycles, opt.omega_count);
    for (double& c : cyc) c *= 2.0 * std::numbers::pi / length;
    return cyc;
  }();
  const std::vector<double> widths = log_spaced(opt.min_width_fraction * length, opt.max_width_fraction * length, opt.width_count);
  std::vector<double> centers;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(std::max(opt.center_stride, 1)))
    centers.push_back(axis_values[i]);
  std::vector<double> sorted_centers = centers;
  std::sort(sorted_centers.begin(), sorted_centers.end());

  auto allowed = [&](AtomKind k) { return std::find(opt.kinds.begin(), opt.kinds.end(), k) != opt.kinds.end(); };

  auto rss_of = [&](const std::vector<BasisAtom>& atoms) { return least_squares(trajectory, axis_values, atoms).rss; };
  auto bic_atoms = [&](const std::vector<BasisAtom>& atoms) {
    return bic_of(rss_of(atoms), n, parameter_count(atoms), floor);
  };

  // Golden-section polish of one atom's nonlinear parameters within one grid
  // step, the other atoms held fixed.
  auto polish = [&](std::vector<BasisAtom> atoms, std::size_t j) {
    BasisAtom& a = atoms[j];
    auto rss_at = [&](const BasisAtom& t) {
      std::vector<BasisAtom> trial = atoms;
      trial[j] = t;
      return rss_of(trial);
    };
    if (a.kind == AtomKind::Sine || a.kind == AtomKind::Cosine) {
      auto [l, h] = bracket(omegas, a.omega);
      if (a.kind == AtomKind::Cosine) l = std::max(l, cosine_min_omega);
      a.omega = golden([&](double om) { BasisAtom t = a; t.omega = om; return rss_at(t); }, l, h);
    } else if (a.kind == AtomKind::Gaussian) {
      for (int pass = 0; pass < 3; ++pass) {
        const auto [cl, ch] = bracket(sorted_centers, a.center);
        a.center = golden([&](double c) { BasisAtom t = a; t.center = c; return rss_at(t); }, cl, ch);
        const auto [wl, wh] = bracket(widths, a.width);
        a.width = golden([&](double w) { BasisAtom t = a; t.width = w; return rss_at(t); }, wl, wh);
      }
    }
    return atoms;
  };

  // Best atom to append to `base` by BIC over the full grid, then polished.
  // Returns false when nothing can be added.
  auto best_extension = [&](const std::vector<BasisAtom>& base, std::vector<BasisAtom>& out) {
    auto present = [&](AtomKind k) {
      return std::any_of(base.begin(), base.end(), [&](const BasisAtom& a) { return a.kind == k; });
    };
    double best = std::numeric_limits<double>::infinity();
    std::vector<BasisAtom> trial = base;
    trial.emplace_back();
    auto consider = [&](const BasisAtom& atom) {
      trial.back() = atom;
      const double b = bic_atoms(trial);
      if (b < best) {
        best = b;
        out = trial;
      }
    };
    if (allowed(AtomKind::Constant) && !present(AtomKind::Constant)) consider({AtomKind::Constant});
    if (allowed(AtomKind::Linear) && !present(AtomKind::Linear)) consider({AtomKind::Linear});
    for (AtomKind k : {AtomKind::Sine, AtomKind::Cosine})
      if (allowed(k))
        for (double om : omegas)
          if (k == AtomKind::Sine || om >= cosine_min_omega) consider({k, om});
    if (allowed(AtomKind::Gaussian))
      for (double c : centers)
        for (double w : widths) consider({AtomKind::Gaussian, 0.0, c, w});
    if (!std::isfinite(best)) return false;
    if (opt.refine) {
      // Polish the new atom first, then every atom once more in order.
      std::vector<BasisAtom> polished = polish(out, out.size() - 1);
      for (std::size_t j = 0; j < polished.size(); ++j) polished = polish(std::move(polished), j);
      if (bic_atoms(polished) < best) out = std::move(polished);
    }
    return true;
  };

  double current_bic = bic_of(rss_of({}), n, 0, floor);
  for (int stage = 0; stage < opt.max_atoms; ++stage) {
    std::vector<BasisAtom> trial;
    if (!best_extension(fit.atoms, trial)) break;
    double trial_bic = bic_atoms(trial);

    // Single-atom swaps: re-choose each atom with the others fixed until no
    // swap lowers the BIC, so an early stand-in atom can be replaced.
    for (int pass = 0; pass < 4 && trial.size() > 1; ++pass) {
      bool improved = false;
      for (std::size_t j = 0; j < trial.size(); ++j) {
        std::vector<BasisAtom> others = trial;
        others.erase(others.begin() + static_cast<std::ptrdiff_t>(j));
        std::vector<BasisAtom> swapped;
        if (!best_extension(others, swapped)) continue;
        const double b = bic_atoms(swapped);
        if (b < trial_bic - 1e-9 * std::abs(trial_bic)) {
          trial = std::move(swapped);
          trial_bic = b;
          improved = true;
        }
      }
      if (!improved) break;
    }

    // Acceptance uses an effective sample size from the lag-1 residual
    // autocorrelation of the extended fit: estimated coefficient trajectories
    // carry smooth, correlated errors that would otherwise buy extra atoms.
    const LsResult ext = least_squares(trajectory, axis_values, trial);
    const double n_eff = effective_samples(trajectory, axis_values, trial, ext.weights);
    const double prev_rss = rss_of(fit.atoms);
    const double bic_prev = bic_eff(prev_rss, n, n_eff, parameter_count(fit.atoms), floor);
    const double bic_next = bic_eff(ext.rss, n, n_eff, parameter_count(trial), floor);
    if (!(bic_next < bic_prev)) break;
    fit.atoms = std::move(trial);
    current_bic = trial_bic;
  }
  LsResult current = least_squares(trajectory, axis_values, fit.atoms);

  if (fit.atoms.empty()) {
    fit.atoms = {BasisAtom{AtomKind::Constant}};
    current = least_squares(trajectory, axis_values, fit.atoms);
    current_bic = bic_of(current.rss, n, 1, floor);
  }
  fit.weights = current.weights;
  fit.rss = current.rss;
  fit.fit_bic = current_bic;
  fit.expression = format_expression(fit, opt.variable);
  return fit;
}

double coefficient_error(std::span<const double> truth, std::span<const double> fitted) {
  if (truth.size() != fitted.size()) throw ConfigError("coefficient_error: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += std::abs(fitted[i] - truth[i]);
    den += std::abs(truth[i]);
  }
  if (!(den > 0.0)) throw DataError("coefficient_error: ground truth has zero L1 norm");
  return 100.0 * num / den;
}

std::string format_expression(const CoefficientFit& fit, const std::string& var) {
  // Non-constant atoms first, constant last.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < fit.atoms.size(); ++i)
    if (fit.atoms[i].kind != AtomKind::Constant) order.push_back(i);
  for (std::size_t i = 0; i < fit.atoms.size(); ++i)
    if (fit.atoms[i].kind == AtomKind::Constant) order.push_back(i);

  std::string out;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const BasisAtom& a = fit.atoms[order[pos]];
    const double w = fit.weights[order[pos]];
    const double mag = pos == 0 ? w : std::abs(w);
    if (pos > 0) out += w < 0.0 ? " - " : " + ";
    out += fmt6(mag);
    switch (a.kind) {
      case AtomKind::Constant: break;
      case AtomKind::Linear: out += "*" + var; break;
      case AtomKind::Sine: out += "*sin(" + fmt6(a.omega) + "*" + var + ")"; break;
      case AtomKind::Cosine: out += "*cos(" + fmt6(a.omega) + "*" + var + ")"; break;
      case AtomKind::Gaussian:
        out += "*exp(-((" + var + (a.center < 0.0 ? "+" : "-") + fmt6(std::abs(a.center)) + ")/" +
               fmt6(a.width) + ")^2)";
        break;
    }
  }
  return out;
}

double evaluate_expression(const std::string& expression, const std::string& variable, double x) {
  return ExprParser(expression, variable, x).parse();
}

}  // namespace parapde
