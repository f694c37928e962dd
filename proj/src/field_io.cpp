#include "parapde/field_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "parapde/errors.hpp"

namespace parapde {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError("cannot parse number '" + std::string(s) + "'");
  return v;
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  std::string line;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) line += ',';
      line += format_double(m(i, j));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw DataError("write failed for " + path.string());
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(parse_double(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(path.string() + ": ragged row " + std::to_string(rows.size() + 1));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + " is empty");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

void write_dataset(const fs::path& dir, const Dataset& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

  const Grid& g = data.u.grid;
  json meta = {
      {"schema_version", kFieldSchemaVersion},
      {"grid",
       {{"x_min", g.x_min}, {"x_max", g.x_max}, {"n_x", g.n_x},
        {"t_min", g.t_min}, {"t_max", g.t_max}, {"n_t", g.n_t}, {"periodic", g.periodic}}},
      {"noise_percent", data.meta.noise_percent},
      {"seed", data.meta.seed},
      {"solver_substeps", data.meta.solver_substeps},
  };
  meta["pde_id"] = data.meta.pde_id ? json(to_string(*data.meta.pde_id)) : json(nullptr);
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
  write_matrix_csv(dir / "u.csv", data.u.values);
  if (data.u_clean) write_matrix_csv(dir / "u_clean.csv", data.u_clean->values);
}

Dataset read_dataset(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw DataError("missing " + (dir / "meta.json").string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed meta.json: " + std::string(e.what()));
  }

  Dataset data;
  Grid g;
  try {
    if (meta.value("schema_version", 0) != kFieldSchemaVersion)
      throw DataError("unsupported meta.json schema_version");
    const json& jg = meta.at("grid");
    g.x_min = jg.at("x_min").get<double>();
    g.x_max = jg.at("x_max").get<double>();
    g.n_x = jg.at("n_x").get<std::size_t>();
    g.t_min = jg.at("t_min").get<double>();
    g.t_max = jg.at("t_max").get<double>();
    g.n_t = jg.at("n_t").get<std::size_t>();
    g.periodic = jg.value("periodic", true);
    if (meta.contains("pde_id") && !meta["pde_id"].is_null())
      data.meta.pde_id = parse_pde_id(meta["pde_id"].get<std::string>());
    data.meta.noise_percent = meta.value("noise_percent", 0.0);
    data.meta.seed = meta.value("seed", std::uint64_t{0});
    data.meta.solver_substeps = meta.value("solver_substeps", std::size_t{0});
  } catch (const json::exception& e) {
    throw DataError("malformed meta.json: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw DataError(std::string("meta.json: ") + e.what());
  }

  try {
    data.u = Field(g, read_matrix_csv(dir / "u.csv"));
    if (fs::exists(dir / "u_clean.csv")) data.u_clean = Field(g, read_matrix_csv(dir / "u_clean.csv"));
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid grid in meta.json: ") + e.what());
  }
  return data;
}

}  // namespace parapde
