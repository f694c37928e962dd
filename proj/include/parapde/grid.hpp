#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace parapde {

/// Uniform spatio-temporal grid. Periodic domains exclude the right endpoint
/// in x; the time axis always includes both endpoints.
struct Grid {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t n_x = 8;
  double t_min = 0.0;
  double t_max = 1.0;
  std::size_t n_t = 8;
  bool periodic = true;

  double dx() const;
  double dt() const;
  double length() const { return x_max - x_min; }
  double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }
  double t(std::size_t j) const { return t_min + static_cast<double>(j) * dt(); }
  std::vector<double> x_axis() const;
  std::vector<double> t_axis() const;

  // Throws ConfigError when the invariants do not hold.
  void validate() const;

  bool operator==(const Grid&) const = default;
};

/// Real field sampled on a grid; values(i, j) is u(x_i, t_j). Column j is the
/// spatial profile at time t_j.
struct Field {
  Grid grid;
  Eigen::MatrixXd values;

  Field() = default;
  Field(Grid g, Eigen::MatrixXd v);

  std::size_t n_x() const { return grid.n_x; }
  std::size_t n_t() const { return grid.n_t; }

  void validate() const;
};

/// Transposed view of a field: swaps the roles of the axes so x becomes the
/// "time" axis. Used only for axis-duality checks.
Field transpose(const Field& f);

/// Population standard deviation over all entries.
double population_sd(const Eigen::MatrixXd& m);

}  // namespace parapde
