#include "febm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "febm/errors.hpp"

namespace febm {

void Grid2d::validate() const {
  if (nx < 2 || ny < 2) throw DomainError("Grid2d: need at least 2x2 cells");
  if (!(x1 > x0) || !(y1 > y0)) throw DomainError("Grid2d: empty extent");
}

Tensor grid_points(const Grid2d& grid) {
  grid.validate();
  const double dx = (grid.x1 - grid.x0) / static_cast<double>(grid.nx);
  const double dy = (grid.y1 - grid.y0) / static_cast<double>(grid.ny);
  Tensor pts = Tensor::zeros({grid.size(), 2});
  std::size_t r = 0;
  for (std::size_t i = 0; i < grid.nx; ++i) {
    const double x = grid.x0 + (static_cast<double>(i) + 0.5) * dx;
    for (std::size_t j = 0; j < grid.ny; ++j) {
      pts.at(r, 0) = x;
      pts.at(r, 1) = grid.y0 + (static_cast<double>(j) + 0.5) * dy;
      ++r;
    }
  }
  return pts;
}

Tensor eval_log_density_grid(
    const Grid2d& grid, const std::function<Tensor(const Tensor&)>& logp_batch,
    std::size_t chunk) {
  if (chunk < 1) throw DomainError("eval_log_density_grid: chunk must be >= 1");
  const Tensor pts = grid_points(grid);
  Tensor out = Tensor::zeros({grid.size(), 1});
  for (std::size_t start = 0; start < pts.rows(); start += chunk) {
    const std::size_t rows = std::min(chunk, pts.rows() - start);
    Tensor part = Tensor::zeros({rows, 2});
    for (std::size_t i = 0; i < rows; ++i) {
      part.at(i, 0) = pts.at(start + i, 0);
      part.at(i, 1) = pts.at(start + i, 1);
    }
    const Tensor lp = logp_batch(part);
    if (lp.rank() != 2 || lp.rows() != rows || lp.cols() != 1)
      throw ShapeError("eval_log_density_grid: callback must return [B, 1]");
    for (std::size_t i = 0; i < rows; ++i) out[start + i] = lp[i];
  }
  return out;
}

namespace {

double check_grid_values(const Grid2d& grid, const Tensor& lp,
                         const char* who) {
  grid.validate();
  if (lp.size() != grid.size())
    throw ShapeError(std::string(who) + ": log-density size mismatch");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lp.size(); ++i) mx = std::max(mx, lp.data()[i]);
  if (!std::isfinite(mx))
    throw NumericalError(std::string(who) + ": log-density has no finite peak");
  return mx;
}

}  // namespace

double grid_quadrature(const Grid2d& grid, const Tensor& log_density) {
  const double mx = check_grid_values(grid, log_density, "grid_quadrature");
  double acc = 0.0;
  for (std::size_t i = 0; i < log_density.size(); ++i)
    acc += std::exp(log_density.data()[i] - mx);
  return std::exp(mx) * acc * grid.cell_area();
}

double grid_kl(const Tensor& log_p, const Tensor& log_q) {
  if (!log_p.same_shape(log_q) || log_p.size() == 0)
    throw ShapeError("grid_kl: mismatched grids");
  // Normalize both on the grid via log-sum-exp, then accumulate
  // sum p_i (log p_i - log q_i).
  auto lse = [](const Tensor& t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.size(); ++i) mx = std::max(mx, t.data()[i]);
    if (!std::isfinite(mx))
      throw NumericalError("grid_kl: log-density has no finite peak");
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
      acc += std::exp(t.data()[i] - mx);
    return mx + std::log(acc);
  };
  const double zp = lse(log_p);
  const double zq = lse(log_q);
  double kl = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    const double lpn = log_p.data()[i] - zp;
    const double w = std::exp(lpn);
    if (w == 0.0) continue;
    kl += w * (lpn - (log_q.data()[i] - zq));
  }
  return kl;
}

}  // namespace febm
