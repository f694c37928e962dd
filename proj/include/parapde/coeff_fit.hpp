#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parapde/terms.hpp"

namespace parapde {

enum class AtomKind { Constant, Linear, Sine, Cosine, Gaussian };

std::string to_string(AtomKind k);

/// One basis function. Sine/cosine use omega; the Gaussian is
/// exp(-((x - center) / width)^2).
struct BasisAtom {
  AtomKind kind = AtomKind::Constant;
  double omega = 0.0;
  double center = 0.0;
  double width = 1.0;

  double operator()(double x) const;
  int nonlinear_parameters() const;
};

struct CoefficientFitOptions {
  int max_atoms = 3;
  std::vector<AtomKind> kinds = {AtomKind::Constant, AtomKind::Sine, AtomKind::Cosine, AtomKind::Gaussian};
  int omega_count = 64;
  double min_cycles = 0.1;         // per domain length
  double min_cosine_cycles = 0.5;  // cosines below this mimic the constant
  double max_cycles = 32.0;
  int center_stride = 4;
  int width_count = 16;
  double min_width_fraction = 0.02;  // of the domain length
  double max_width_fraction = 0.5;
  bool refine = true;  // golden-section polish within one grid step
  std::string variable = "x";
};

struct CoefficientFit {
  std::optional<TermDescriptor> term;
  std::vector<BasisAtom> atoms;
  std::vector<double> weights;
  double rss = 0.0;
  double fit_bic = 0.0;
  std::string expression;
  std::optional<double> ce_percent;

  double evaluate(double x) const;
  std::vector<double> evaluate(std::span<const double> xs) const;
};

/// Greedy atom-by-atom basis fit: each stage grid-searches one more atom
/// (jointly refitting all linear weights) and keeps it while the BIC improves.
CoefficientFit fit_expression(std::span<const double> trajectory, std::span<const double> axis_values,
                              const CoefficientFitOptions& options = {});

/// 100 * ||fitted - truth||_1 / ||truth||_1. Throws DataError when the truth
/// has zero L1 norm.
double coefficient_error(std::span<const double> truth, std::span<const double> fitted);

/// Canonical text of a fit: atoms joined by " + " / " - ", weights with six
/// significant digits, constant last.
std::string format_expression(const CoefficientFit& fit, const std::string& variable);

/// Evaluates an expression in the canonical grammar at one point.
double evaluate_expression(const std::string& expression, const std::string& variable, double x);

}  // namespace parapde
