#include "parapde/preprocessing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "parapde/errors.hpp"

namespace parapde {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

void check_savgol_config(int window, int polyorder, std::size_t n, const char* what) {
  std::ostringstream msg;
  if (window < 1 || window % 2 == 0) msg << what << ": window must be odd (got " << window << ")";
  else if (polyorder < 0 || window <= polyorder)
    msg << what << ": window " << window << " must exceed polyorder " << polyorder;
  else if (static_cast<std::size_t>(window) > n)
    msg << what << ": window " << window << " longer than the axis (" << n << ")";
  if (!msg.str().empty()) throw ConfigError(msg.str());
}

// Applies `filter` to every column (axis 0) or every row (axis 1).
template <typename Fn>
Eigen::MatrixXd apply_along(const Eigen::MatrixXd& m, int axis, Fn&& filter) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  if (axis == 0) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const Eigen::VectorXd col = m.col(j);
      const std::vector<double> r = filter(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
      out.col(j) = Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    }
  } else {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const Eigen::VectorXd row = m.row(i).transpose();
      const std::vector<double> r = filter(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
      out.row(i) = Eigen::Map<const Eigen::RowVectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    }
  }
  return out;
}

}  // namespace

std::vector<double> savgol_weights(int left, int right, int polyorder, int deriv) {
  const int len = left + right + 1;
  Eigen::MatrixXd vander(len, polyorder + 1);
  for (int r = 0; r < len; ++r) {
    const double off = static_cast<double>(r - left);
    double p = 1.0;
    for (int c = 0; c <= polyorder; ++c, p *= off) vander(r, c) = p;
  }
  // Row `deriv` of the pseudo-inverse maps samples to the polynomial coefficient.
  const Eigen::MatrixXd pinv = vander.completeOrthogonalDecomposition().pseudoInverse();
  std::vector<double> w(static_cast<std::size_t>(len));
  const double scale = factorial(deriv);
  for (int r = 0; r < len; ++r) w[static_cast<std::size_t>(r)] = scale * pinv(deriv, r);
  return w;
}

std::vector<double> savgol_filter(std::span<const double> y, int window, int polyorder, int deriv,
                                  double spacing, bool periodic) {
  const auto n = static_cast<std::ptrdiff_t>(y.size());
  check_savgol_config(window, polyorder, y.size(), "savgol_filter");
  if (deriv > polyorder) throw ConfigError("savgol_filter: derivative order exceeds polyorder");
  const int half = window / 2;
  const double scale = 1.0 / std::pow(spacing, deriv);
  std::vector<double> out(y.size());

  const std::vector<double> center = savgol_weights(half, half, polyorder, deriv);
  auto at = [&](std::ptrdiff_t i) { return y[static_cast<std::size_t>(((i % n) + n) % n)]; };

  // Weights act on offsets from y[i]; they sum to 1 (deriv 0) or 0, so
  // constants pass through without rounding.
  const double base_weight = deriv == 0 ? 1.0 : 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const bool interior = i >= half && i < n - half;
    const double yi = y[static_cast<std::size_t>(i)];
    if (periodic || interior) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) acc += center[static_cast<std::size_t>(k + half)] * (at(i + k) - yi);
      out[static_cast<std::size_t>(i)] = (base_weight * yi + acc) * scale;
    } else {
      // One-sided window anchored at the nearest end.
      const std::ptrdiff_t start = i < half ? 0 : n - window;
      const int left = static_cast<int>(i - start);
      const std::vector<double> w = savgol_weights(left, window - 1 - left, polyorder, deriv);
      double acc = 0.0;
      for (int k = 0; k < window; ++k) acc += w[static_cast<std::size_t>(k)] * (y[static_cast<std::size_t>(start + k)] - yi);
      out[static_cast<std::size_t>(i)] = (base_weight * yi + acc) * scale;
    }
  }
  return out;
}

Field smooth_field(const Field& noisy, int window, int polyorder) {
  check_savgol_config(window, polyorder, std::min(noisy.n_x(), noisy.n_t()), "smooth_field");
  const Grid& g = noisy.grid;
  Eigen::MatrixXd v = apply_along(noisy.values, 0, [&](std::span<const double> s) {
    return savgol_filter(s, window, polyorder, 0, 1.0, g.periodic);
  });
  v = apply_along(v, 1, [&](std::span<const double> s) {
    return savgol_filter(s, window, polyorder, 0, 1.0, false);
  });
  return Field(g, std::move(v));
}

std::vector<double> default_ratio_grid() {
  std::vector<double> out;
  for (int k = -8; k <= 4; ++k) out.push_back(std::pow(10.0, k));
  return out;
}

std::vector<double> kalman_smoothed_velocity(std::span<const double> y, double dt, double ratio,
                                             double* log_likelihood) {
  using Mat2 = Eigen::Matrix2d;
  using Vec2 = Eigen::Vector2d;
  const std::size_t n = y.size();
  if (n < 8) throw ConfigError("kalman_time_derivative needs at least 8 time samples");

  Mat2 F;
  F << 1.0, dt, 0.0, 1.0;
  // White acceleration per frame, expressed for a per-unit-time velocity state.
  Mat2 Q;
  Q << ratio / 3.0, ratio / (2.0 * dt), ratio / (2.0 * dt), ratio / (dt * dt);

  std::vector<Vec2> m_filt(n), m_pred(n);
  std::vector<Mat2> p_filt(n), p_pred(n);

  // Exact two-point initialisation at index 1 (observation variance is 1 in
  // units of the concentrated-out noise scale).
  m_filt[1] = Vec2(y[1], (y[1] - y[0]) / dt);
  p_filt[1] << 1.0, 1.0 / dt, 1.0 / dt, 2.0 / (dt * dt);

  double sum_log_s = 0.0, sum_v2_s = 0.0;
  for (std::size_t i = 2; i < n; ++i) {
    m_pred[i] = F * m_filt[i - 1];
    p_pred[i] = F * p_filt[i - 1] * F.transpose() + Q;
    const double s = p_pred[i](0, 0) + 1.0;
    if (!(s > 0.0) || !std::isfinite(s)) {
      std::ostringstream msg;
      msg << "kalman smoother: singular innovation covariance at frame " << i;
      throw NumericalError(msg.str());
    }
    const double v = y[i] - m_pred[i](0);
    const Vec2 gain = p_pred[i].col(0) / s;
    m_filt[i] = m_pred[i] + gain * v;
    p_filt[i] = p_pred[i] - gain * gain.transpose() * s;
    p_filt[i] = 0.5 * (p_filt[i] + p_filt[i].transpose());
    sum_log_s += std::log(s);
    sum_v2_s += v * v / s;
  }

  if (log_likelihood) {
    const double n_eff = static_cast<double>(n - 2);
    const double sigma2 = std::max(sum_v2_s / n_eff, std::numeric_limits<double>::min());
    *log_likelihood = -0.5 * (n_eff * std::log(sigma2) + sum_log_s +
                              n_eff * (1.0 + std::log(2.0 * std::numbers::pi)));
  }

  std::vector<Vec2> m_smooth(n);
  m_smooth[n - 1] = m_filt[n - 1];
  for (std::size_t i = n - 1; i-- > 1;) {
    const Mat2 gain = p_filt[i] * F.transpose() * p_pred[i + 1].inverse();
    m_smooth[i] = m_filt[i] + gain * (m_smooth[i + 1] - m_pred[i + 1]);
  }
  // Frame 0 carries only y[0]; condition it on the smoothed frame-1 state.
  {
    const Mat2 qinv = Q.inverse();
    Mat2 a = F.transpose() * qinv * F;
    a(0, 0) += 1.0;
    const Vec2 b = Vec2(y[0], 0.0) + F.transpose() * qinv * m_smooth[1];
    m_smooth[0] = a.lu().solve(b);
  }

  std::vector<double> vel(n);
  for (std::size_t i = 0; i < n; ++i) vel[i] = m_smooth[i](1);
  return vel;
}

namespace {

std::vector<Eigen::VectorXd> time_series(const Field& field) {
  std::vector<Eigen::VectorXd> rows(static_cast<std::size_t>(field.values.rows()));
  for (Eigen::Index i = 0; i < field.values.rows(); ++i) rows[static_cast<std::size_t>(i)] = field.values.row(i).transpose();
  return rows;
}

std::span<const double> span_of(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

std::pair<double, double> select_kalman_ratio(const Field& field, std::span<const double> ratio_grid) {
  if (field.n_t() < 8) throw ConfigError("kalman_time_derivative needs n_t >= 8");
  if (ratio_grid.empty()) throw ConfigError("kalman ratio grid is empty");
  const double dt = field.grid.dt();
  const auto rows = time_series(field);
  double best_ll = -std::numeric_limits<double>::infinity();
  double best_ratio = ratio_grid[0];
  for (double q : ratio_grid) {
    if (!(q > 0.0)) throw ConfigError("kalman ratios must be positive");
    double total = 0.0;
    for (const auto& r : rows) {
      double ll = 0.0;
      kalman_smoothed_velocity(span_of(r), dt, q, &ll);
      total += ll;
    }
    if (total > best_ll) {
      best_ll = total;
      best_ratio = q;
    }
  }
  return {best_ratio, best_ll};
}

KalmanDerivative kalman_time_derivative(const Field& field, std::span<const double> ratio_grid,
                                        const Field* tuning_field) {
  const auto [ratio, ll] = select_kalman_ratio(tuning_field ? *tuning_field : field, ratio_grid);
  const double dt = field.grid.dt();
  const auto rows = time_series(field);
  Eigen::MatrixXd ut(field.values.rows(), field.values.cols());
  for (Eigen::Index i = 0; i < field.values.rows(); ++i) {
    const std::vector<double> v = kalman_smoothed_velocity(span_of(rows[static_cast<std::size_t>(i)]), dt, ratio);
    ut.row(i) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return {Field(field.grid, std::move(ut)), ratio, ll};
}

DerivativeStack spatial_derivatives(const Field& field, int max_order, int window, int polyorder) {
  if (max_order < 1 || max_order > kMaxDerivative)
    throw ConfigError("spatial_derivatives: max_order must be in 1..4");
  if (polyorder < max_order + 1)
    throw ConfigError("spatial_derivatives: polyorder must be at least max_order + 1");
  check_savgol_config(window, polyorder, field.n_x(), "spatial_derivatives");

  DerivativeStack stack;
  stack.u = field;
  const double dx = field.grid.dx();
  for (int d = 1; d <= kMaxDerivative; ++d) {
    Field& out = stack.spatial[static_cast<std::size_t>(d - 1)];
    out.grid = field.grid;
    if (d > max_order) {
      out.values = Eigen::MatrixXd::Zero(field.values.rows(), field.values.cols());
      continue;
    }
    out.values = apply_along(field.values, 0, [&](std::span<const double> s) {
      return savgol_filter(s, window, polyorder, d, dx, field.grid.periodic);
    });
  }
  return stack;
}

CandidateLibrary CandidateLibrary::select_samples(std::span<const std::size_t> rows) const {
  CandidateLibrary out;
  out.axis = axis;
  out.terms = terms;
  out.axis_values = axis_values;
  out.sample_spacing = sample_spacing;
  out.steps.reserve(steps.size());
  out.targets.reserve(targets.size());
  const auto n = static_cast<Eigen::Index>(rows.size());
  for (std::size_t s = 0; s < steps.size(); ++s) {
    Eigen::MatrixXd q(n, steps[s].cols());
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto src = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
      q.row(r) = steps[s].row(src);
      y(r) = targets[s](src);
    }
    out.steps.push_back(std::move(q));
    out.targets.push_back(std::move(y));
  }
  return out;
}

CandidateLibrary CandidateLibrary::select_steps(std::size_t first, std::size_t last) const {
  if (first >= last || last > steps.size()) throw ConfigError("invalid step range");
  CandidateLibrary out;
  out.axis = axis;
  out.terms = terms;
  out.sample_spacing = sample_spacing;
  out.steps.assign(steps.begin() + static_cast<std::ptrdiff_t>(first), steps.begin() + static_cast<std::ptrdiff_t>(last));
  out.targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(first), targets.begin() + static_cast<std::ptrdiff_t>(last));
  if (!axis_values.empty())
    out.axis_values.assign(axis_values.begin() + static_cast<std::ptrdiff_t>(first),
                           axis_values.begin() + static_cast<std::ptrdiff_t>(last));
  return out;
}

CandidateLibrary build_library(const DerivativeStack& stack, ParameterAxis axis) {
  const Grid& g = stack.u.grid;
  if (stack.u_t.values.rows() != stack.u.values.rows() || stack.u_t.values.cols() != stack.u.values.cols())
    throw DataError("build_library: u_t shape does not match u");
  for (const Field& f : stack.spatial)
    if (f.values.rows() != stack.u.values.rows() || f.values.cols() != stack.u.values.cols())
      throw DataError("build_library: derivative shapes differ");

  CandidateLibrary lib;
  lib.axis = axis;
  lib.terms = all_terms();
  const bool temporal = axis == ParameterAxis::Temporal;
  const Eigen::Index n_steps = temporal ? stack.u.values.cols() : stack.u.values.rows();
  const Eigen::Index n_samples = temporal ? stack.u.values.rows() : stack.u.values.cols();
  lib.axis_values = temporal ? g.t_axis() : g.x_axis();
  lib.sample_spacing = temporal ? g.dx() : g.dt();

  auto slice = [&](const Eigen::MatrixXd& m, Eigen::Index step) -> Eigen::VectorXd {
    return temporal ? Eigen::VectorXd(m.col(step)) : Eigen::VectorXd(m.row(step).transpose());
  };

  lib.steps.reserve(static_cast<std::size_t>(n_steps));
  lib.targets.reserve(static_cast<std::size_t>(n_steps));
  for (Eigen::Index s = 0; s < n_steps; ++s) {
    const Eigen::VectorXd u = slice(stack.u.values, s);
    Eigen::MatrixXd q(n_samples, static_cast<Eigen::Index>(kNumTerms));
    for (const TermDescriptor& t : lib.terms) {
      Eigen::ArrayXd col = Eigen::ArrayXd::Ones(n_samples);
      for (int p = 0; p < t.power; ++p) col *= u.array();
      if (t.derivative_order > 0) col *= slice(stack.derivative(t.derivative_order).values, s).array();
      q.col(static_cast<Eigen::Index>(t.index())) = col.matrix();
    }
    lib.steps.push_back(std::move(q));
    lib.targets.push_back(slice(stack.u_t.values, s));
  }
  return lib;
}

LibrarySplit train_validation_split(const CandidateLibrary& library, double fraction,
                                    std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must be in (0, 1)");
  const std::size_t n = library.n_samples();
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_train < library.n_terms() || n_train >= n) {
    std::ostringstream msg;
    msg << "degenerate split: " << n_train << " training of " << n << " samples (need at least "
        << library.n_terms() << " and a nonempty validation set)";
    throw ConfigError(msg.str());
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the permutation does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  LibrarySplit split;
  split.train_rows.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation_rows.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.validation_rows.begin(), split.validation_rows.end());
  split.train = library.select_samples(split.train_rows);
  split.validation = library.select_samples(split.validation_rows);
  return split;
}

}  // namespace parapde
