#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "parapde/dataset.hpp"
#include "parapde/grid.hpp"

namespace parapde {

inline constexpr int kFieldSchemaVersion = 1;

struct DatasetMeta {
  std::optional<PdeId> pde_id;  // absent for externally produced data
  double noise_percent = 0.0;
  std::uint64_t seed = 0;
  std::size_t solver_substeps = 0;
};

struct Dataset {
  DatasetMeta meta;
  Field u;
  std::optional<Field> u_clean;
};

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

/// Writes meta.json and u.csv (plus u_clean.csv when present).
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
/// Reads the layout written by write_dataset. Throws DataError on malformed input.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace parapde
