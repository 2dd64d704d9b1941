#pragma once

#include <cstddef>
#include <functional>

#include "febm/tensor.hpp"

namespace febm {

// Uniform 2-D evaluation grid over [x0, x1] x [y0, y1], sampled at cell
// centers so quadrature weights are one cell area everywhere.
struct Grid2d {
  std::size_t nx = 200;
  std::size_t ny = 200;
  double x0 = -6.0, x1 = 6.0;
  double y0 = -6.0, y1 = 6.0;

  double cell_area() const {
    return (x1 - x0) / static_cast<double>(nx) * (y1 - y0) /
           static_cast<double>(ny);
  }
  std::size_t size() const { return nx * ny; }
  void validate() const;
};

// Cell centers, [nx * ny, 2], x-major.
Tensor grid_points(const Grid2d& grid);

// Evaluates a batched log-density over the grid in chunks (tape-backed
// densities would otherwise build one huge graph). logp_batch maps [B, 2] to
// [B, 1]; the result is [nx * ny, 1] in grid_points order.
Tensor eval_log_density_grid(const Grid2d& grid,
                             const std::function<Tensor(const Tensor&)>& logp_batch,
                             std::size_t chunk = 2048);

// Midpoint quadrature of exp(log_density) over the grid.
double grid_quadrature(const Grid2d& grid, const Tensor& log_density);

// KL(p || q) between two densities known up to constants on the same grid;
// both are normalized by grid quadrature first.
double grid_kl(const Tensor& log_p, const Tensor& log_q);

}  // namespace febm
