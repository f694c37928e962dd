#include "parapde/grid.hpp"

#include <cmath>
#include <sstream>

#include "parapde/errors.hpp"

namespace parapde {

double Grid::dx() const {
  const double span = x_max - x_min;
  return periodic ? span / static_cast<double>(n_x)
                  : span / static_cast<double>(n_x - 1);
}

double Grid::dt() const { return (t_max - t_min) / static_cast<double>(n_t - 1); }

std::vector<double> Grid::x_axis() const {
  std::vector<double> out(n_x);
  for (std::size_t i = 0; i < n_x; ++i) out[i] = x(i);
  return out;
}

std::vector<double> Grid::t_axis() const {
  std::vector<double> out(n_t);
  for (std::size_t j = 0; j < n_t; ++j) out[j] = t(j);
  return out;
}

void Grid::validate() const {
  std::ostringstream msg;
  if (n_x < 8 || n_t < 8) msg << "grid needs n_x >= 8 and n_t >= 8 (got " << n_x << "x" << n_t << ")";
  else if (!(x_max > x_min)) msg << "grid needs x_max > x_min";
  else if (!(t_max > t_min)) msg << "grid needs t_max > t_min";
  else if (!std::isfinite(x_min) || !std::isfinite(x_max) || !std::isfinite(t_min) ||
           !std::isfinite(t_max))
    msg << "grid bounds must be finite";
  if (!msg.str().empty()) throw ConfigError(msg.str());
}

Field::Field(Grid g, Eigen::MatrixXd v) : grid(g), values(std::move(v)) { validate(); }

void Field::validate() const {
  grid.validate();
  if (static_cast<std::size_t>(values.rows()) != grid.n_x ||
      static_cast<std::size_t>(values.cols()) != grid.n_t) {
    std::ostringstream msg;
    msg << "field shape " << values.rows() << "x" << values.cols() << " does not match grid "
        << grid.n_x << "x" << grid.n_t;
    throw DataError(msg.str());
  }
  if (!values.allFinite()) throw DataError("field contains non-finite values");
}

Field transpose(const Field& f) {
  Grid g;
  g.x_min = f.grid.t_min;
  g.x_max = f.grid.t_max;
  g.n_x = f.grid.n_t;
  g.t_min = f.grid.x_min;
  g.t_max = f.grid.x_max;
  g.n_t = f.grid.n_x;
  g.periodic = false;
  Field out;
  out.grid = g;
  out.values = f.values.transpose();
  return out;
}

double population_sd(const Eigen::MatrixXd& m) {
  const double n = static_cast<double>(m.size());
  const double mean = m.sum() / n;
  return std::sqrt((m.array() - mean).square().sum() / n);
}

}  // namespace parapde
