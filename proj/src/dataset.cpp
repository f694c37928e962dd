#include "parapde/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <ranges>
#include <sstream>

#include "parapde/errors.hpp"
#include "parapde/fft.hpp"

namespace parapde {

namespace {

using cd = std::complex<double>;
using Spectrum = std::vector<cd>;
constexpr double kPi = std::numbers::pi;

double burgers_a(double t) { return -(1.0 + std::sin(t) / 4.0); }

double ad_c(double x) { return -1.5 + std::cos(2.0 * kPi * x / 5.0); }
double ad_dc(double x) { return -(2.0 * kPi / 5.0) * std::sin(2.0 * kPi * x / 5.0); }

double ks_a(double x) { return 1.0 + 0.25 * std::sin(2.0 * kPi * x / 20.0); }
double ks_b(double x) { return -1.0 + 0.25 * std::exp(-(x - 2.0) * (x - 2.0) / 5.0); }
double ks_c(double x) { return -1.0 - 0.25 * std::exp(-(x + 2.0) * (x + 2.0) / 5.0); }

// Pseudo-spectral helper for a periodic 1-D domain.
class SpectralOps {
 public:
  explicit SpectralOps(const Grid& grid)
      : n_(grid.n_x), fft_(grid.n_x), k_(wavenumbers(grid.n_x, grid.length())) {}

  std::size_t modes() const { return k_.size(); }
  double k(std::size_t m) const { return k_[m]; }

  Spectrum to_spectral(const std::vector<double>& u) { return fft_.forward(u); }

  std::vector<double> to_physical(const Spectrum& uh) {
    std::vector<double> u(n_);
    fft_.inverse(uh, u);
    const double inv = 1.0 / static_cast<double>(n_);
    for (double& v : u) v *= inv;
    return u;
  }

  // (ik)^order * uh; the Nyquist mode is dropped for odd orders.
  Spectrum derivative(const Spectrum& uh, int order) const {
    Spectrum out(uh.size());
    const cd ik_unit(0.0, 1.0);
    for (std::size_t m = 0; m < uh.size(); ++m) {
      out[m] = uh[m] * std::pow(ik_unit * k_[m], order);
    }
    if (order % 2 == 1 && n_ % 2 == 0) out.back() = 0.0;
    return out;
  }

 private:
  std::size_t n_;
  RealFft fft_;
  std::vector<double> k_;
};

void check_finite(const std::vector<double>& u, std::size_t step, const char* name) {
  double max_abs = 0.0;
  bool finite = true;
  for (double v : u) {
    if (!std::isfinite(v)) finite = false;
    else max_abs = std::max(max_abs, std::abs(v));
  }
  if (!finite || max_abs > 1e8) {
    std::ostringstream msg;
    msg << name << " solver blew up at step " << step << " (max |u| = " << max_abs << ")";
    throw NumericalError(msg.str());
  }
}

using NonlinearFn = std::function<Spectrum(const Spectrum&, double)>;

// Lawson integrating-factor RK4 for u_t = L u + N(u, t) with diagonal real L.
Eigen::MatrixXd integrate_if_rk4(const Grid& grid, std::vector<double> u0, std::size_t substeps,
                                 const std::vector<double>& lin, SpectralOps& ops,
                                 const NonlinearFn& nonlinear, const char* name) {
  const std::size_t n_modes = ops.modes();
  const double h = grid.dt() / static_cast<double>(substeps);
  std::vector<double> e_half(n_modes), e_full(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m) {
    e_half[m] = std::exp(lin[m] * h / 2.0);
    e_full[m] = std::exp(lin[m] * h);
  }

  Eigen::MatrixXd out(grid.n_x, grid.n_t);
  out.col(0) = Eigen::Map<const Eigen::VectorXd>(u0.data(), static_cast<Eigen::Index>(u0.size()));
  Spectrum uh = ops.to_spectral(u0);
  Spectrum stage(n_modes);

  std::size_t step = 0;
  for (std::size_t frame = 1; frame < grid.n_t; ++frame) {
    for (std::size_t s = 0; s < substeps; ++s, ++step) {
      const double t = grid.t_min + static_cast<double>(step) * h;
      const Spectrum k1 = nonlinear(uh, t);
      for (std::size_t m = 0; m < n_modes; ++m) stage[m] = e_half[m] * (uh[m] + 0.5 * h * k1[m]);
      const Spectrum k2 = nonlinear(stage, t + 0.5 * h);
      for (std::size_t m = 0; m < n_modes; ++m) stage[m] = e_half[m] * uh[m] + 0.5 * h * k2[m];
      const Spectrum k3 = nonlinear(stage, t + 0.5 * h);
      for (std::size_t m = 0; m < n_modes; ++m) stage[m] = e_full[m] * uh[m] + h * e_half[m] * k3[m];
      const Spectrum k4 = nonlinear(stage, t + h);
      for (std::size_t m = 0; m < n_modes; ++m) {
        uh[m] = e_full[m] * uh[m] +
                h / 6.0 * (e_full[m] * k1[m] + 2.0 * e_half[m] * (k2[m] + k3[m]) + k4[m]);
      }
    }
    const std::vector<double> u = ops.to_physical(uh);
    check_finite(u, step, name);
    out.col(static_cast<Eigen::Index>(frame)) =
        Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
  }
  return out;
}

// ETDRK4 coefficients evaluated by contour averaging to avoid cancellation.
struct EtdCoefficients {
  std::vector<double> e, e2, q, f1, f2, f3;
};

EtdCoefficients etd_coefficients(const std::vector<double>& lin, double h) {
  constexpr int kContour = 32;
  EtdCoefficients c;
  const std::size_t n = lin.size();
  for (auto* v : {&c.e, &c.e2, &c.q, &c.f1, &c.f2, &c.f3}) v->assign(n, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    const double hl = h * lin[m];
    c.e[m] = std::exp(hl);
    c.e2[m] = std::exp(hl / 2.0);
    cd q = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
    for (int j = 1; j <= kContour; ++j) {
      const cd r = std::exp(cd(0.0, kPi * (j - 0.5) / kContour));
      const cd z = hl + r;
      const cd ez = std::exp(z);
      q += (std::exp(z / 2.0) - 1.0) / z;
      f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / (z * z * z);
      f2 += (2.0 + z + ez * (-2.0 + z)) / (z * z * z);
      f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / (z * z * z);
    }
    c.q[m] = h * (q / double(kContour)).real();
    c.f1[m] = h * (f1 / double(kContour)).real();
    c.f2[m] = h * (f2 / double(kContour)).real();
    c.f3[m] = h * (f3 / double(kContour)).real();
  }
  return c;
}

std::vector<double> initial_or_default(const BenchmarkSpec& spec, const Grid& grid) {
  std::vector<double> u0 = spec.initial_condition ? *spec.initial_condition
                                                  : default_initial_condition(spec.pde_id, grid);
  if (u0.size() != grid.n_x) throw ConfigError("initial condition length does not match n_x");
  return u0;
}

Grid resolve_grid(const BenchmarkSpec& spec) {
  Grid g = spec.grid ? *spec.grid : default_grid(spec.pde_id);
  g.validate();
  if (!g.periodic) throw ConfigError("benchmark solvers require a periodic grid");
  if (spec.solver_substeps == 0) throw ConfigError("solver_substeps must be positive");
  return g;
}

void expect_id(const BenchmarkSpec& spec, PdeId id) {
  if (spec.pde_id != id)
    throw ConfigError("benchmark spec is for " + to_string(spec.pde_id) + ", not " + to_string(id));
}

}  // namespace

std::string to_string(PdeId id) {
  switch (id) {
    case PdeId::Burgers: return "burgers";
    case PdeId::AdvectionDiffusion: return "advection_diffusion";
    case PdeId::KuramotoSivashinsky: return "kuramoto_sivashinsky";
  }
  return "unknown";
}

std::vector<std::string> valid_pde_ids() {
  return {"burgers", "advection_diffusion", "kuramoto_sivashinsky"};
}

PdeId parse_pde_id(const std::string& s) {
  if (s == "burgers") return PdeId::Burgers;
  if (s == "advection_diffusion" || s == "ad") return PdeId::AdvectionDiffusion;
  if (s == "kuramoto_sivashinsky" || s == "ks") return PdeId::KuramotoSivashinsky;
  std::string msg = "unknown pde id '" + s + "'; valid ids:";
  for (const auto& v : valid_pde_ids()) msg += " " + v;
  throw ConfigError(msg);
}

ParameterAxis parameter_axis(PdeId id) {
  return id == PdeId::Burgers ? ParameterAxis::Temporal : ParameterAxis::Spatial;
}

Grid default_grid(PdeId id) {
  switch (id) {
    case PdeId::Burgers: return {-8.0, 8.0, 256, 0.0, 1.0, 256, true};
    case PdeId::AdvectionDiffusion: return {-5.0, 5.0, 256, 0.0, 5.0, 256, true};
    case PdeId::KuramotoSivashinsky: return {-20.0, 20.0, 512, 0.0, 200.0, 1024, true};
  }
  throw ConfigError("unknown pde id");
}

std::vector<double> default_initial_condition(PdeId id, const Grid& grid) {
  std::vector<double> u0(grid.n_x);
  for (std::size_t i = 0; i < grid.n_x; ++i) {
    const double x = grid.x(i);
    switch (id) {
      case PdeId::Burgers: u0[i] = std::exp(-(x + 2.0) * (x + 2.0)); break;
      case PdeId::AdvectionDiffusion: u0[i] = std::cos(2.0 * kPi * x / 10.0); break;
      case PdeId::KuramotoSivashinsky:
        u0[i] = std::cos(2.0 * kPi * x / 20.0) * (1.0 + std::sin(2.0 * kPi * x / 20.0));
        break;
    }
  }
  return u0;
}

Field solve_burgers(const BenchmarkSpec& spec) {
  expect_id(spec, PdeId::Burgers);
  const Grid grid = resolve_grid(spec);
  SpectralOps ops(grid);
  std::vector<double> lin(ops.modes());
  for (std::size_t m = 0; m < lin.size(); ++m) lin[m] = -0.1 * ops.k(m) * ops.k(m);

  // a(t) d/dx (u^2 / 2): conservative form keeps the mean mode exactly zero.
  const NonlinearFn rhs = [&ops](const Spectrum& uh, double t) {
    std::vector<double> u = ops.to_physical(uh);
    for (double& v : u) v = 0.5 * v * v;
    Spectrum out = ops.derivative(ops.to_spectral(u), 1);
    const double a = burgers_a(t);
    for (cd& v : out) v *= a;
    return out;
  };
  return Field(grid, integrate_if_rk4(grid, initial_or_default(spec, grid), spec.solver_substeps,
                                      lin, ops, rhs, "burgers"));
}

Field solve_advection_diffusion(const BenchmarkSpec& spec) {
  expect_id(spec, PdeId::AdvectionDiffusion);
  const Grid grid = resolve_grid(spec);
  SpectralOps ops(grid);
  std::vector<double> lin(ops.modes());
  for (std::size_t m = 0; m < lin.size(); ++m) lin[m] = -0.1 * ops.k(m) * ops.k(m);

  std::vector<double> c(grid.n_x);
  for (std::size_t i = 0; i < grid.n_x; ++i) c[i] = ad_c(grid.x(i));

  // c'(x) u + c(x) u_x written as d/dx (c u).
  const NonlinearFn rhs = [&ops, &c](const Spectrum& uh, double) {
    std::vector<double> u = ops.to_physical(uh);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= c[i];
    return ops.derivative(ops.to_spectral(u), 1);
  };
  return Field(grid, integrate_if_rk4(grid, initial_or_default(spec, grid), spec.solver_substeps,
                                      lin, ops, rhs, "advection_diffusion"));
}

Field solve_kuramoto_sivashinsky(const BenchmarkSpec& spec) {
  expect_id(spec, PdeId::KuramotoSivashinsky);
  const Grid grid = resolve_grid(spec);
  SpectralOps ops(grid);
  const std::size_t n_modes = ops.modes();

  // Reference operator L0 = -d_xx - d_xxxx, i.e. k^2 - k^4 in Fourier space.
  std::vector<double> lin(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m) {
    const double k2 = ops.k(m) * ops.k(m);
    lin[m] = k2 - k2 * k2;
  }

  std::vector<double> a(grid.n_x), b_res(grid.n_x), c_res(grid.n_x);
  for (std::size_t i = 0; i < grid.n_x; ++i) {
    const double x = grid.x(i);
    a[i] = spec.ks_constant_coefficients ? 1.0 : ks_a(x);
    b_res[i] = spec.ks_constant_coefficients ? 0.0 : ks_b(x) + 1.0;
    c_res[i] = spec.ks_constant_coefficients ? 0.0 : ks_c(x) + 1.0;
  }

  const double h = grid.dt() / static_cast<double>(spec.solver_substeps);
  std::vector<double> u0 = initial_or_default(spec, grid);

  // Reject step sizes where the explicit residual is neither within the RK4
  // stability interval nor dominated by the exponential reference operator.
  {
    const double max_a = std::ranges::max(a | std::views::transform([](double v) { return std::abs(v); }));
    const double max_b = std::ranges::max(b_res | std::views::transform([](double v) { return std::abs(v); }));
    const double max_c = std::ranges::max(c_res | std::views::transform([](double v) { return std::abs(v); }));
    const double max_u = std::max(1.0, std::ranges::max(u0 | std::views::transform([](double v) { return std::abs(v); })));
    for (std::size_t m = 0; m < n_modes; ++m) {
      const double k = ops.k(m);
      const double rho = max_a * max_u * k + max_b * k * k + max_c * k * k * k * k;
      if (rho * h > 2.78 && rho > std::abs(lin[m])) {
        std::ostringstream msg;
        msg << "kuramoto_sivashinsky step size " << h << " violates the explicit stability bound at k = "
            << k << "; increase solver_substeps";
        throw NumericalError(msg.str());
      }
    }
  }

  const EtdCoefficients etd = etd_coefficients(lin, h);
  auto rhs = [&](const Spectrum& uh) {
    const std::vector<double> u = ops.to_physical(uh);
    const std::vector<double> ux = ops.to_physical(ops.derivative(uh, 1));
    const std::vector<double> uxx = ops.to_physical(ops.derivative(uh, 2));
    const std::vector<double> uxxxx = ops.to_physical(ops.derivative(uh, 4));
    std::vector<double> r(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
      r[i] = a[i] * u[i] * ux[i] + b_res[i] * uxx[i] + c_res[i] * uxxxx[i];
    return ops.to_spectral(r);
  };

  const std::size_t n_keep = grid.n_t / 2;
  Eigen::MatrixXd out(grid.n_x, n_keep);
  out.col(0) = Eigen::Map<const Eigen::VectorXd>(u0.data(), static_cast<Eigen::Index>(u0.size()));
  Spectrum v = ops.to_spectral(u0);
  Spectrum sa(n_modes), sb(n_modes), sc(n_modes);
  std::size_t step = 0;
  for (std::size_t frame = 1; frame < n_keep; ++frame) {
    for (std::size_t s = 0; s < spec.solver_substeps; ++s, ++step) {
      const Spectrum nv = rhs(v);
      for (std::size_t m = 0; m < n_modes; ++m) sa[m] = etd.e2[m] * v[m] + etd.q[m] * nv[m];
      const Spectrum na = rhs(sa);
      for (std::size_t m = 0; m < n_modes; ++m) sb[m] = etd.e2[m] * v[m] + etd.q[m] * na[m];
      const Spectrum nb = rhs(sb);
      for (std::size_t m = 0; m < n_modes; ++m)
        sc[m] = etd.e2[m] * sa[m] + etd.q[m] * (2.0 * nb[m] - nv[m]);
      const Spectrum nc = rhs(sc);
      for (std::size_t m = 0; m < n_modes; ++m) {
        v[m] = etd.e[m] * v[m] + nv[m] * etd.f1[m] + 2.0 * (na[m] + nb[m]) * etd.f2[m] +
               nc[m] * etd.f3[m];
      }
    }
    const std::vector<double> u = ops.to_physical(v);
    check_finite(u, step, "kuramoto_sivashinsky");
    out.col(static_cast<Eigen::Index>(frame)) =
        Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
  }

  Grid kept = grid;
  kept.n_t = n_keep;
  kept.t_max = grid.t(n_keep - 1);
  return Field(kept, std::move(out));
}

Field solve_benchmark(const BenchmarkSpec& spec) {
  switch (spec.pde_id) {
    case PdeId::Burgers: return solve_burgers(spec);
    case PdeId::AdvectionDiffusion: return solve_advection_diffusion(spec);
    case PdeId::KuramotoSivashinsky: return solve_kuramoto_sivashinsky(spec);
  }
  throw ConfigError("unknown pde id");
}

Field add_noise(const Field& field, double noise_percent, std::uint64_t seed) {
  if (!(noise_percent >= 0.0)) throw ConfigError("noise percent must be nonnegative");
  Field out = field;
  if (noise_percent == 0.0) return out;
  const double scale = noise_percent / 100.0 * population_sd(field.values);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Column-major fill order (space fastest) fixes the draw-to-entry mapping.
  for (Eigen::Index j = 0; j < out.values.cols(); ++j)
    for (Eigen::Index i = 0; i < out.values.rows(); ++i) out.values(i, j) += scale * normal(rng);
  return out;
}

std::vector<TrueCoefficient> true_coefficients(PdeId id, const Grid& grid) {
  const ParameterAxis axis = parameter_axis(id);
  const std::vector<double> axis_values = axis == ParameterAxis::Temporal ? grid.t_axis() : grid.x_axis();
  auto sample = [&](auto fn) {
    std::vector<double> v(axis_values.size());
    std::transform(axis_values.begin(), axis_values.end(), v.begin(), fn);
    return v;
  };
  auto constant = [](double c) { return [c](double) { return c; }; };

  switch (id) {
    case PdeId::Burgers:
      return {{{0, 2}, sample(constant(0.1))}, {{1, 1}, sample(burgers_a)}};
    case PdeId::AdvectionDiffusion:
      return {{{0, 1}, sample(ad_c)}, {{0, 2}, sample(constant(0.1))}, {{1, 0}, sample(ad_dc)}};
    case PdeId::KuramotoSivashinsky:
      return {{{0, 2}, sample(ks_b)}, {{0, 4}, sample(ks_c)}, {{1, 1}, sample(ks_a)}};
  }
  return {};
}

}  // namespace parapde
