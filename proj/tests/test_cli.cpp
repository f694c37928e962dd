#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "parapde/errors.hpp"
#include "parapde/pipeline.hpp"

using namespace parapde;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("parapde_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Runs the CLI, capturing stdout+stderr into `log`; returns the exit status.
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + PARAPDE_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config entries round-trip through set_config_value") {
  PipelineConfig c;
  c.pde = "kuramoto_sivashinsky";
  c.noise = 0.01;
  c.deriv_window = 25;
  c.kalman_ratios = {0.001, 10.0};
  c.transform = "identity";
  c.trim_low = 4;
  PipelineConfig back;
  for (const auto& [k, v] : config_entries(c)) set_config_value(back, k, v);
  CHECK(config_entries(back) == config_entries(c));
  CHECK(back.kalman_ratios == c.kalman_ratios);

  CHECK_THROWS_AS(set_config_value(back, "no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(back, "deriv_window", "wide"), ConfigError);
  back.deriv_window = 4;
  CHECK_THROWS_AS(validate_config(back), ConfigError);

  const fs::path dir = scratch_dir("config");
  std::ofstream(dir / "run.conf") << "# comment\n\npde = advection_diffusion\ndedup = 1\n";
  CHECK_THROWS_AS(load_config(dir / "run.conf"), ConfigError);
  std::ofstream(dir / "ok.conf") << "pde = advection_diffusion  # inline\nnoise = 4\n";
  const PipelineConfig ok = load_config(dir / "ok.conf");
  CHECK(ok.pde == "advection_diffusion");
  CHECK(ok.noise == 4.0);
}

TEST_CASE("thread cap reads the environment") {
  unsetenv("PARAPDE_THREADS");
  CHECK(thread_cap() == 1);
  setenv("PARAPDE_THREADS", "3", 1);
  CHECK(thread_cap() == 3);
  setenv("PARAPDE_THREADS", "many", 1);
  CHECK_THROWS_AS(thread_cap(), ConfigError);
  unsetenv("PARAPDE_THREADS");
}

TEST_CASE("generate is deterministic and rejects unknown benchmarks") {
  const fs::path dir = scratch_dir("generate");
  CHECK(run_cli("generate --pde burgers --noise 2 --seed 4 --out " + (dir / "a").string(), dir / "log") == 0);
  CHECK(run_cli("generate --pde burgers --noise 2 --seed 4 --out " + (dir / "b").string(), dir / "log") == 0);
  CHECK(slurp(dir / "a" / "u.csv") == slurp(dir / "b" / "u.csv"));
  CHECK(slurp(dir / "a" / "u_clean.csv") == slurp(dir / "b" / "u_clean.csv"));
  CHECK(slurp(dir / "a" / "u.csv") != slurp(dir / "a" / "u_clean.csv"));

  CHECK(run_cli("generate --pde burgers --noise 0 --out " + (dir / "c").string(), dir / "log") == 0);
  CHECK(slurp(dir / "c" / "u.csv") == slurp(dir / "a" / "u_clean.csv"));

  CHECK(run_cli("generate --pde heat --out " + (dir / "d").string(), dir / "log") == 2);
  const std::string msg = slurp(dir / "log");
  CHECK(msg.find("kuramoto_sivashinsky") != std::string::npos);
  CHECK(run_cli("generate --pde burgers", dir / "log") == 2);
  CHECK(run_cli("--version", dir / "log") == 0);
}

TEST_CASE("discover is reproducible and reports its outputs") {
  const fs::path dir = scratch_dir("discover");
  const std::string common = "discover --pde burgers --noise 2 --seed 1 --set s_max=4 --out ";
  REQUIRE(run_cli(common + (dir / "r1").string(), dir / "log") == 0);
  REQUIRE(run_cli(common + (dir / "r2").string(), dir / "log") == 0);
  for (const char* f : {"scores.csv", "filter.csv", "selection.json", "coeffs.json", "bands.csv"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / "r1" / f));
    CHECK(slurp(dir / "r1" / f) == slurp(dir / "r2" / f));
  }
  const std::string manifest = slurp(dir / "r1" / "manifest.json");
  CHECK(manifest.find("\"status\": \"complete\"") != std::string::npos);
  CHECK(manifest.find("\"tool_version\"") != std::string::npos);
  CHECK(slurp(dir / "r1" / "selection.json").find("\"u u_x\"") != std::string::npos);

  CHECK(run_cli("discover --data " + (dir / "missing").string() + " --out " + (dir / "r3").string(), dir / "log") == 3);
  CHECK(run_cli("discover --pde burgers --set bogus=1 --out " + (dir / "r4").string(), dir / "log") == 2);
}

TEST_CASE("criteria and psd-bench commands") {
  const fs::path dir = scratch_dir("criteria");
  REQUIRE(run_cli("criteria --pde burgers --noise 2 --set s_max=3 --out " + (dir / "c").string(), dir / "log") == 0);
  const std::string scores = slurp(dir / "c" / "scores.csv");
  CHECK(scores.rfind("support_size,terms,rss_raw,rss_psd,aic,aicc,aicc_undefined,bic,", 0) == 0);
  CHECK(scores.find("inf") == std::string::npos);

  REQUIRE(run_cli("generate --pde burgers --noise 0 --out " + (dir / "clean").string(), dir / "log") == 0);
  REQUIRE(run_cli("psd-bench --data " + (dir / "clean").string() + " --out " + (dir / "b").string(), dir / "log") == 0);
  const std::string csv = slurp(dir / "b" / "representation_errors.csv");
  CHECK(csv == "representation,rel_error\nraw,0\ndft_magnitude,0\npsd_integrated,0\n");

  REQUIRE(run_cli("generate --pde burgers --noise 2 --out " + (dir / "noisy").string(), dir / "log") == 0);
  fs::remove(dir / "noisy" / "u_clean.csv");
  CHECK(run_cli("psd-bench --data " + (dir / "noisy").string() + " --out " + (dir / "b2").string(), dir / "log") == 3);
}
