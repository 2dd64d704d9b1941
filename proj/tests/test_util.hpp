#pragma once

// Shared oracles for the test suite: finite differences, a numeric Jacobian
// and determinant, distribution statistics, and small reference processes.
// Everything here is deliberately independent of the library's autodiff and
// linear algebra so the two sides can disagree.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "febm/rng.hpp"
#include "febm/tensor.hpp"

namespace test_util {

// Mixed absolute/relative comparison: |a - b| <= tol * max(1, |a|, |b|).
inline bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline double max_abs_diff(const febm::Tensor& a, const febm::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Central finite difference of a scalar field evaluated at x, one partial
// per element.
inline febm::Tensor fd_gradient(
    const std::function<double(const febm::Tensor&)>& f, const febm::Tensor& x,
    double h = 1e-6) {
  febm::Tensor grad = febm::Tensor::zeros(x.shape());
  febm::Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Central-difference Jacobian of a vector field, row i = doutput_i / dinput.
inline febm::Tensor numeric_jacobian(
    const std::function<febm::Tensor(const febm::Tensor&)>& f,
    const febm::Tensor& x, double h = 1e-6) {
  const febm::Tensor y0 = f(x);
  febm::Tensor jac = febm::Tensor::zeros({y0.size(), x.size()});
  febm::Tensor probe = x;
  for (std::size_t j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + h;
    const febm::Tensor up = f(probe);
    probe[j] = x[j] - h;
    const febm::Tensor down = f(probe);
    probe[j] = x[j];
    for (std::size_t i = 0; i < y0.size(); ++i)
      jac.at(i, j) = (up[i] - down[i]) / (2.0 * h);
  }
  return jac;
}

// Determinant by Gaussian elimination with partial pivoting.
inline double determinant(febm::Tensor m) {
  const std::size_t n = m.rows();
  double det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m.at(r, col)) > std::abs(m.at(pivot, col))) pivot = r;
    if (m.at(pivot, col) == 0.0) return 0.0;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c)
        std::swap(m.at(pivot, c), m.at(col, c));
      det = -det;
    }
    det *= m.at(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = m.at(r, col) / m.at(col, col);
      for (std::size_t c = col; c < n; ++c)
        m.at(r, c) -= factor * m.at(col, c);
    }
  }
  return det;
}

// Standard normal CDF.
inline double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double c = cdf(sample[i]);
    d = std::max(d, std::abs(c - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - c));
  }
  return d;
}

// Stationary AR(1) series x_t = phi x_{t-1} + e_t with unit-variance
// stationary distribution; the autocorrelation at lag k is phi^k.
inline std::vector<double> ar1_series(double phi, std::size_t n,
                                      febm::Rng& rng) {
  std::vector<double> x(n);
  const double innovation = std::sqrt(1.0 - phi * phi);
  x[0] = rng.normal();
  for (std::size_t t = 1; t < n; ++t)
    x[t] = phi * x[t - 1] + innovation * rng.normal();
  return x;
}

// Sample mean and unbiased variance.
inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace test_util
