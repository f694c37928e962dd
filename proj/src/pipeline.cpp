#include "parapde/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "parapde/errors.hpp"

namespace parapde {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const Error&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 9e15)
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  return static_cast<long long>(d);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const long long i = to_int(key, v);
  if (i < 0) throw ConfigError("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(i);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::string one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (v == a) return v;
    list += list.empty() ? a : std::string(", ") + a;
  }
  throw ConfigError("config key '" + key + "': '" + v + "' is not one of " + list);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const PipelineConfig&)>;

struct Key {
  Setter set;
  Getter get;
};

const std::vector<std::pair<std::string, Key>>& keys() {
  static const std::vector<std::pair<std::string, Key>> table = [] {
    std::vector<std::pair<std::string, Key>> t;
    auto str = [&](const char* name, std::string PipelineConfig::*m) {
      t.push_back({name, {[m](PipelineConfig& c, const std::string&, const std::string& v) { c.*m = v; },
                          [m](const PipelineConfig& c) { return c.*m; }}});
    };
    auto dbl = [&](const char* name, double PipelineConfig::*m) {
      t.push_back({name, {[m](PipelineConfig& c, const std::string& k, const std::string& v) { c.*m = to_double(k, v); },
                          [m](const PipelineConfig& c) { return format_double(c.*m); }}});
    };
    auto integer = [&](const char* name, int PipelineConfig::*m) {
      t.push_back({name, {[m](PipelineConfig& c, const std::string& k, const std::string& v) {
                            c.*m = static_cast<int>(to_int(k, v));
                          },
                          [m](const PipelineConfig& c) { return std::to_string(c.*m); }}});
    };
    auto size = [&](const char* name, std::size_t PipelineConfig::*m) {
      t.push_back({name, {[m](PipelineConfig& c, const std::string& k, const std::string& v) { c.*m = to_size(k, v); },
                          [m](const PipelineConfig& c) { return std::to_string(c.*m); }}});
    };
    auto u64 = [&](const char* name, std::uint64_t PipelineConfig::*m) {
      t.push_back({name, {[m](PipelineConfig& c, const std::string& k, const std::string& v) { c.*m = to_size(k, v); },
                          [m](const PipelineConfig& c) { return std::to_string(c.*m); }}});
    };
    str("data_dir", &PipelineConfig::data_dir);
    str("pde", &PipelineConfig::pde);
    dbl("noise", &PipelineConfig::noise);
    u64("seed", &PipelineConfig::seed);
    size("solver_substeps", &PipelineConfig::solver_substeps);
    t.push_back({"smooth", {[](PipelineConfig& c, const std::string& k, const std::string& v) { c.smooth = to_bool(k, v); },
                            [](const PipelineConfig& c) { return std::string(c.smooth ? "true" : "false"); }}});
    integer("smooth_window", &PipelineConfig::smooth_window);
    integer("smooth_polyorder", &PipelineConfig::smooth_polyorder);
    integer("deriv_window", &PipelineConfig::deriv_window);
    integer("deriv_polyorder", &PipelineConfig::deriv_polyorder);
    t.push_back({"kalman_ratios", {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                                     c.kalman_ratios.clear();
                                     std::stringstream ss(v);
                                     std::string item;
                                     while (std::getline(ss, item, ',')) c.kalman_ratios.push_back(to_double(k, trim(item)));
                                   },
                                   [](const PipelineConfig& c) { return join_doubles(c.kalman_ratios); }}});
    t.push_back({"axis", {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                            c.axis = one_of(k, v, {"auto", "temporal", "spatial"});
                          },
                          [](const PipelineConfig& c) { return c.axis; }}});
    t.push_back({"validation", {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                                  c.validation = one_of(k, v, {"frequency", "random_split"});
                                },
                                [](const PipelineConfig& c) { return c.validation; }}});
    dbl("split_fraction", &PipelineConfig::split_fraction);
    u64("split_seed", &PipelineConfig::split_seed);
    dbl("frequency_percentile", &PipelineConfig::frequency_percentile);
    t.push_back({"power_aggregation", {[](PipelineConfig& c, const std::string&, const std::string& v) {
                                         c.power_aggregation = to_string(parse_power_aggregation(v));
                                       },
                                       [](const PipelineConfig& c) { return c.power_aggregation; }}});
    t.push_back({"support_mode", {[](PipelineConfig& c, const std::string&, const std::string& v) {
                                    c.support_mode = to_string(parse_support_mode(v));
                                  },
                                  [](const PipelineConfig& c) { return c.support_mode; }}});
    t.push_back({"search", {[](PipelineConfig& c, const std::string&, const std::string& v) {
                              c.search = to_string(parse_strategy(v));
                            },
                            [](const PipelineConfig& c) { return c.search; }}});
    size("s_max", &PipelineConfig::s_max);
    integer("ard_max_iter", &PipelineConfig::ard_max_iter);
    dbl("ard_tol", &PipelineConfig::ard_tol);
    t.push_back({"ratio_coefficients", {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                                          c.ratio_coefficients = one_of(k, v, {"ard_mean", "ols"});
                                        },
                                        [](const PipelineConfig& c) { return c.ratio_coefficients; }}});
    size("trim_low", &PipelineConfig::trim_low);
    size("trim_high", &PipelineConfig::trim_high);
    t.push_back({"transform", {[](PipelineConfig& c, const std::string&, const std::string& v) {
                                 c.transform = to_string(parse_transform(v));
                               },
                               [](const PipelineConfig& c) { return c.transform; }}});
    dbl("lambda_min", &PipelineConfig::lambda_min);
    dbl("lambda_max", &PipelineConfig::lambda_max);
    dbl("lambda_step", &PipelineConfig::lambda_step);
    integer("max_atoms", &PipelineConfig::max_atoms);
    size("fit_edge_trim", &PipelineConfig::fit_edge_trim);
    str("out", &PipelineConfig::out);
    return t;
  }();
  return table;
}

class StageClock {
 public:
  StageClock(DiscoveryResult& r, std::string name) : r_(r), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

  template <typename F>
  void run(F&& f) {
    try {
      f();
    } catch (const Error& e) {
      r_.failed_stage = name_;
      throw Error(e.kind(), "stage " + name_ + ": " + e.what());
    } catch (const std::exception& e) {
      r_.failed_stage = name_;
      throw NumericalError("stage " + name_ + ": " + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    r_.timings.push_back({name_, secs});
    r_.completed_stages.push_back(name_);
  }

 private:
  DiscoveryResult& r_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

template <typename F>
void stage(DiscoveryResult& r, const std::string& name, F&& f) {
  StageClock(r, name).run(std::forward<F>(f));
}

}  // namespace

void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value) {
  for (const auto& [name, k] : keys()) {
    if (name == key) {
      k.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  PipelineConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate_config(cfg);
  return cfg;
}

void validate_config(const PipelineConfig& c) {
  if (c.data_dir.empty()) parse_pde_id(c.pde);
  if (!(c.noise >= 0.0 && std::isfinite(c.noise))) throw ConfigError("noise must be a non-negative percentage");
  if (c.solver_substeps < 1) throw ConfigError("solver_substeps must be at least 1");
  if (c.smooth && (c.smooth_window < 3 || c.smooth_window % 2 == 0 || c.smooth_polyorder < 0 ||
                   c.smooth_polyorder >= c.smooth_window))
    throw ConfigError("smooth_window must be odd and >= 3 with 0 <= smooth_polyorder < smooth_window");
  if (c.deriv_window < 3 || c.deriv_window % 2 == 0 || c.deriv_polyorder < kMaxDerivative + 1 ||
      c.deriv_polyorder >= c.deriv_window)
    throw ConfigError("deriv_window must be odd with 5 <= deriv_polyorder < deriv_window");
  if (c.kalman_ratios.empty()) throw ConfigError("kalman_ratios must not be empty");
  for (double r : c.kalman_ratios)
    if (!(r > 0.0 && std::isfinite(r))) throw ConfigError("kalman_ratios must be positive");
  if (!(c.split_fraction > 0.0 && c.split_fraction < 1.0)) throw ConfigError("split_fraction must be in (0, 1)");
  if (!(c.frequency_percentile >= 0.0 && c.frequency_percentile < 100.0))
    throw ConfigError("frequency_percentile must be in [0, 100)");
  if (c.s_max < 1 || c.s_max > kNumTerms) throw ConfigError("s_max must be in 1..20");
  if (c.ard_max_iter < 1) throw ConfigError("ard_max_iter must be positive");
  if (!(c.ard_tol > 0.0)) throw ConfigError("ard_tol must be positive");
  if (!(c.lambda_step > 0.0) || !(c.lambda_max >= c.lambda_min))
    throw ConfigError("lambda grid needs lambda_step > 0 and lambda_max >= lambda_min");
  if (c.max_atoms < 1 || c.max_atoms > 3) throw ConfigError("max_atoms must be in 1..3");
  if (c.out.empty()) throw ConfigError("out must not be empty");
}

std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, k] : keys()) out.emplace_back(name, k.get(config));
  return out;
}

std::vector<double> lambda_grid(const PipelineConfig& c) {
  std::vector<double> g;
  const auto n = static_cast<int>(std::floor((c.lambda_max - c.lambda_min) / c.lambda_step + 1e-9));
  for (int i = 0; i <= n; ++i) g.push_back(c.lambda_min + i * c.lambda_step);
  return g;
}

int thread_cap() {
  const char* env = std::getenv("PARAPDE_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError(std::string("PARAPDE_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<int>(v);
}

Dataset obtain_dataset(const PipelineConfig& c) {
  if (!c.data_dir.empty()) return read_dataset(c.data_dir);
  BenchmarkSpec spec;
  spec.pde_id = parse_pde_id(c.pde);
  spec.noise_percent = c.noise;
  spec.rng_seed = c.seed;
  spec.solver_substeps = c.solver_substeps;
  Field clean = solve_benchmark(spec);
  Dataset d{{spec.pde_id, c.noise, c.seed, c.solver_substeps}, add_noise(clean, c.noise, c.seed), std::nullopt};
  d.u_clean = std::move(clean);
  return d;
}

std::vector<std::size_t> DiscoveryResult::selected_terms() const {
  const SubsetSolution& s = selected();
  if (s.mode == SupportMode::Shared) return s.shared_support;
  std::vector<std::size_t> all;
  for (const auto& sup : s.step_supports) all.insert(all.end(), sup.begin(), sup.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

std::vector<std::string> DiscoveryResult::selected_labels() const {
  std::vector<std::string> out;
  for (std::size_t t : selected_terms()) out.push_back(term_at(t).label());
  return out;
}

std::size_t argmin_bic(const std::vector<CriterionScore>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i].bic < scores[best].bic) best = i;
  return best;
}

ParameterAxis resolve_axis(const Dataset& data, const PipelineConfig& cfg) {
  if (cfg.axis != "auto") return parse_axis(cfg.axis);
  if (!data.meta.pde_id) throw ConfigError("axis = auto needs a dataset with a known pde id; set axis explicitly");
  return parameter_axis(*data.meta.pde_id);
}

KalmanDerivative estimate_time_derivative(const Field& u, const PipelineConfig& cfg) {
  if (!cfg.smooth) return kalman_time_derivative(u, cfg.kalman_ratios);
  const Field smoothed = smooth_field(u, cfg.smooth_window, cfg.smooth_polyorder);
  return kalman_time_derivative(smoothed, cfg.kalman_ratios, &u);
}

std::vector<RepresentationError> psd_benchmark(const Dataset& data, const PipelineConfig& cfg) {
  validate_config(cfg);
  // A noise-free dataset is its own clean reference.
  if (!data.u_clean && data.meta.noise_percent != 0.0)
    throw DataError("psd benchmark needs the clean field (u_clean.csv)");
  const ParameterAxis axis = resolve_axis(data, cfg);
  const Field clean = estimate_time_derivative(data.u_clean ? *data.u_clean : data.u, cfg).u_t;
  const Field noisy = estimate_time_derivative(data.u, cfg).u_t;
  return representation_error_report(clean, noisy, axis);
}

void run_discovery(const Dataset& data, const PipelineConfig& cfg, DiscoveryResult& r, bool criteria_only) {
  validate_config(cfg);
  r.pde = data.meta.pde_id;
  r.axis = resolve_axis(data, cfg);

  DerivativeStack stack;
  stage(r, "preprocess", [&] {
    const Field smoothed = cfg.smooth ? smooth_field(data.u, cfg.smooth_window, cfg.smooth_polyorder) : data.u;
    KalmanDerivative kal = kalman_time_derivative(smoothed, cfg.kalman_ratios, &data.u);
    r.kalman_ratio = kal.ratio;
    stack = spatial_derivatives(smoothed, kMaxDerivative, cfg.deriv_window, cfg.deriv_polyorder);
    stack.u_t = std::move(kal.u_t);
  });

  stage(r, "library", [&] {
    r.library = build_library(stack, r.axis);
    if (cfg.validation == "frequency") {
      r.train = r.library;
      FilteredLibrary f = frequency_filter_validation(r.library, cfg.frequency_percentile,
                                                      parse_power_aggregation(cfg.power_aggregation));
      r.validation = std::move(f.library);
      r.mask = std::move(f.mask);
    } else {
      LibrarySplit s = train_validation_split(r.library, cfg.split_fraction, cfg.split_seed);
      r.train = std::move(s.train);
      r.validation = std::move(s.validation);
    }
  });

  stage(r, "best_subset", [&] {
    const SubsetProblem problem(r.train, r.validation);
    r.path = build_path(problem, cfg.s_max, parse_support_mode(cfg.support_mode), parse_strategy(cfg.search));
  });

  stage(r, "criteria", [&] {
    r.psd_scores = criterion_scores(r.path, {}, r.library, TransformId::PsdIntegrated, 0.0);
    r.identity_scores = criterion_scores(r.path, {}, r.library, TransformId::Identity, 0.0);
  });
  if (criteria_only) return;

  stage(r, "uncertainty", [&] {
    UncertaintyOptions opt;
    opt.ard.max_iter = cfg.ard_max_iter;
    opt.ard.tol = cfg.ard_tol;
    opt.coefficients = cfg.ratio_coefficients == "ols" ? RatioCoefficients::Ols : RatioCoefficients::ArdMean;
    opt.trim_low = cfg.trim_low;
    opt.trim_high = cfg.trim_high;
    r.uncertainty = accumulate_uncertainty(r.path, r.train, opt);
  });

  stage(r, "selection", [&] {
    const auto grid = lambda_grid(cfg);
    r.selection = select_model(r.path, r.uncertainty, r.library, grid, parse_transform(cfg.transform));
  });

  stage(r, "coeff_fit", [&] {
    const SubsetSolution& sol = r.selected();
    std::vector<TrueCoefficient> truth;
    if (r.pde) truth = true_coefficients(*r.pde, data.u.grid);

    CoefficientFitOptions opt;
    opt.max_atoms = cfg.max_atoms;
    opt.variable = r.axis == ParameterAxis::Temporal ? "t" : "x";
    // One-sided derivative windows make the first and last few steps of a
    // non-periodic axis unreliable; they are left out of the fit only.
    const bool periodic_axis = r.axis == ParameterAxis::Spatial && data.u.grid.periodic;
    const std::size_t n_steps = r.library.n_steps();
    const std::size_t trim = periodic_axis ? 0 : std::min(cfg.fit_edge_trim, (n_steps - 4) / 2);
    const std::span<const double> axis_fit(r.library.axis_values.data() + trim, n_steps - 2 * trim);
    for (std::size_t term : r.selected_terms()) {
      std::vector<double> traj(n_steps);
      for (std::size_t i = 0; i < traj.size(); ++i)
        traj[i] = sol.coefficients(static_cast<Eigen::Index>(term), static_cast<Eigen::Index>(i));
      CoefficientFit fit = fit_expression(std::span<const double>(traj).subspan(trim, n_steps - 2 * trim), axis_fit, opt);
      fit.term = term_at(term);
      for (const auto& tc : truth) {
        if (tc.term.index() != term || tc.samples.size() != traj.size()) continue;
        double l1 = 0.0;
        for (double v : tc.samples) l1 += std::abs(v);
        if (l1 > 0.0) fit.ce_percent = coefficient_error(tc.samples, fit.evaluate(r.library.axis_values));
      }
      r.fits.push_back(std::move(fit));
    }
  });
}

}  // namespace parapde
