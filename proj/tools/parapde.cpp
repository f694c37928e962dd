// parapde command-line front end: generate | discover | criteria | psd-bench.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "parapde/errors.hpp"
#include "parapde/pipeline.hpp"
#include "parapde/report.hpp"

namespace fs = std::filesystem;
using namespace parapde;

namespace {

// Flags shared by the pipeline commands; each overrides the config file.
struct CommonFlags {
  std::string config;
  std::optional<std::string> data, pde, transform, out;
  std::optional<double> noise;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--data", f.data, "dataset directory written by generate");
  cmd->add_option("--pde", f.pde, "benchmark to solve when --data is absent");
  cmd->add_option("--noise", f.noise, "noise level in percent of the field's standard deviation");
  cmd->add_option("--seed", f.seed, "noise seed");
  cmd->add_option("--transform", f.transform, "psd | identity");
  cmd->add_option("--out", f.out, "report directory");
  cmd->add_option("--set", f.sets, "extra config override key=value (repeatable)");
}

PipelineConfig resolve(const CommonFlags& f) {
  PipelineConfig c = f.config.empty() ? PipelineConfig{} : load_config(f.config);
  if (f.data) c.data_dir = *f.data;
  if (f.pde) c.pde = *f.pde;
  if (f.noise) c.noise = *f.noise;
  if (f.seed) c.seed = *f.seed;
  if (f.transform) set_config_value(c, "transform", *f.transform);
  if (f.out) c.out = *f.out;
  for (const std::string& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  validate_config(c);
  return c;
}

int cmd_generate(const std::string& pde, double noise, std::uint64_t seed, std::size_t substeps,
                 const std::string& out) {
  PipelineConfig c;
  c.pde = pde;
  c.noise = noise;
  c.seed = seed;
  c.solver_substeps = substeps;
  validate_config(c);
  Dataset d = obtain_dataset(c);
  if (noise == 0.0) d.u_clean.reset();
  write_dataset(out, d);
  std::cout << "wrote " << d.u.n_x() << "x" << d.u.n_t() << " field to " << out << "\n";
  return 0;
}

int cmd_pipeline(const CommonFlags& flags, bool criteria_only) {
  const PipelineConfig c = resolve(flags);
  RunInfo info;
  info.command = criteria_only ? "criteria" : "discover";
  info.threads = thread_cap();
  const Dataset data = obtain_dataset(c);
  DiscoveryResult r;
  try {
    run_discovery(data, c, r, criteria_only);
  } catch (const Error& e) {
    info.status = r.completed_stages.empty() ? "failed" : "partial";
    info.error = e.what();
    write_discovery_report(c.out, c, data.meta, r, info);
    throw;
  }
  info.status = "complete";
  write_discovery_report(c.out, c, data.meta, r, info);
  if (criteria_only) {
    std::cout << "criteria written to " << c.out << "\n";
    return 0;
  }
  std::cout << "s* = " << r.selection.selected_size << ", lambda* = " << r.selection.lambda.lambda_star << "\n";
  for (const CoefficientFit& f : r.fits) {
    std::cout << "  " << f.term->label() << ": " << f.expression;
    if (f.ce_percent) std::cout << "  (CE " << *f.ce_percent << "%)";
    std::cout << "\n";
  }
  return 0;
}

int cmd_psd_bench(const CommonFlags& flags) {
  const PipelineConfig c = resolve(flags);
  const Dataset data = obtain_dataset(c);
  const auto rows = psd_benchmark(data, c);
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw DataError("cannot create " + c.out + ": " + ec.message());
  write_representation_csv(fs::path(c.out) / "representation_errors.csv", rows);
  RunInfo info{"psd-bench", "complete", "", thread_cap()};
  write_manifest_json(fs::path(c.out) / "manifest.json", c, data.meta, nullptr, info);
  std::cout << "representation,rel_error\n";
  for (const auto& row : rows) std::cout << row.representation << ',' << format_double(row.rel_error) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametric PDE discovery with uncertainty-penalised BIC"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  std::string gen_pde = "burgers", gen_out;
  double gen_noise = 0.0;
  std::uint64_t gen_seed = 1;
  std::size_t gen_substeps = 20;
  auto* gen = app.add_subcommand("generate", "solve a benchmark and write a noisy dataset");
  gen->add_option("--pde", gen_pde, "burgers | advection_diffusion | kuramoto_sivashinsky");
  gen->add_option("--noise", gen_noise, "noise level in percent");
  gen->add_option("--seed", gen_seed, "noise seed");
  gen->add_option("--substeps", gen_substeps, "solver substeps per output frame");
  gen->add_option("--out", gen_out, "output directory")->required();

  CommonFlags disc_flags, crit_flags, bench_flags;
  auto* disc = app.add_subcommand("discover", "run the full discovery pipeline");
  add_common(disc, disc_flags);
  auto* crit = app.add_subcommand("criteria", "baseline AIC/AICc/BIC scores only");
  add_common(crit, crit_flags);
  auto* bench = app.add_subcommand("psd-bench", "representation errors of the noisy u_t");
  add_common(bench, bench_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Config);
  }

  try {
    if (*gen) return cmd_generate(gen_pde, gen_noise, gen_seed, gen_substeps, gen_out);
    if (*disc) return cmd_pipeline(disc_flags, false);
    if (*crit) return cmd_pipeline(crit_flags, true);
    if (*bench) return cmd_psd_bench(bench_flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Numerical);
  }
  return 0;
}
