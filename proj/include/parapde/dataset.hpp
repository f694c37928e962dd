#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "parapde/grid.hpp"
#include "parapde/terms.hpp"

namespace parapde {

enum class PdeId { Burgers, AdvectionDiffusion, KuramotoSivashinsky };

std::string to_string(PdeId id);
/// Throws ConfigError listing the valid ids.
PdeId parse_pde_id(const std::string& s);
std::vector<std::string> valid_pde_ids();

/// Parameter axis along which the benchmark's coefficients vary.
ParameterAxis parameter_axis(PdeId id);

struct BenchmarkSpec {
  PdeId pde_id = PdeId::Burgers;
  double noise_percent = 0.0;
  std::uint64_t rng_seed = 1;
  std::size_t solver_substeps = 20;

  // Overrides used by tests and by callers who want a different setup. For
  // Kuramoto-Sivashinsky the grid override describes the full integration
  // window; only its first temporal half is returned.
  std::optional<Grid> grid;
  std::optional<std::vector<double>> initial_condition;
  // Replaces the KS coefficient functions with a = 1, b = -1, c = -1.
  bool ks_constant_coefficients = false;
};

/// Grid used for the benchmark (the full integration grid for KS).
Grid default_grid(PdeId id);

/// Default initial profile on the grid's spatial axis.
std::vector<double> default_initial_condition(PdeId id, const Grid& grid);

Field solve_burgers(const BenchmarkSpec& spec);
Field solve_advection_diffusion(const BenchmarkSpec& spec);
Field solve_kuramoto_sivashinsky(const BenchmarkSpec& spec);

/// Dispatches on spec.pde_id. Noise is not applied.
Field solve_benchmark(const BenchmarkSpec& spec);

/// field + (eps/100) * sd(field) * Z, Z iid standard normal from `seed`.
Field add_noise(const Field& field, double noise_percent, std::uint64_t seed);

struct TrueCoefficient {
  TermDescriptor term;
  std::vector<double> samples;  // along the parameter axis
};

std::vector<TrueCoefficient> true_coefficients(PdeId id, const Grid& grid);

}  // namespace parapde
