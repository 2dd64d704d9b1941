#include "febm/diagnostics.hpp"

#include <cmath>
#include <limits>

#include "febm/errors.hpp"

namespace febm {

namespace {

// Exact constancy test. Summation rounding can leave a tiny nonzero variance
// on a series of identical values, so degenerate series are detected by
// comparison, not by the computed variance.
bool all_equal(const double* v, std::size_t n) {
  for (std::size_t t = 1; t < n; ++t)
    if (v[t] != v[0]) return false;
  return true;
}

}  // namespace

GrReport gelman_rubin(const ChainEnsemble& e) {
  e.validate();
  const std::size_t m = e.chains;
  const std::size_t n = e.kept_steps();
  const std::size_t d = e.dim;
  if (m < 2) throw DomainError("gelman_rubin: needs at least 2 chains");
  if (n < 2) throw DomainError("gelman_rubin: needs at least 2 kept steps");
  GrReport rep;
  rep.r_hat.resize(d);
  rep.within_var.resize(d);
  rep.between_var.resize(d);
  rep.pooled_var.resize(d);
  double sum_r = 0.0, max_r = 0.0;
  std::vector<double> series(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> chain_mean(m, 0.0);
    double sw = 0.0, grand = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      for (std::size_t t = 0; t < n; ++t)
        series[t] = e.at(c, e.burn_in + t, j);
      if (all_equal(series.data(), n)) {
        // Exactly zero variance; the mean dodges summation rounding too.
        chain_mean[c] = series[0];
      } else {
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t) s += series[t];
        chain_mean[c] = s / static_cast<double>(n);
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
          const double dv = series[t] - chain_mean[c];
          acc += dv * dv;
        }
        sw += acc / static_cast<double>(n - 1);
      }
      grand += chain_mean[c];
    }
    grand /= static_cast<double>(m);
    sw /= static_cast<double>(m);
    double sb = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double dv = chain_mean[c] - grand;
      sb += dv * dv;
    }
    sb *= static_cast<double>(n) / static_cast<double>(m - 1);
    const double nn = static_cast<double>(n);
    const double pooled = (nn - 1.0) / nn * sw + sb / nn;
    rep.within_var[j] = sw;
    rep.between_var[j] = sb;
    rep.pooled_var[j] = pooled;
    if (sw == 0.0) {
      rep.r_hat[j] = std::numeric_limits<double>::infinity();
      rep.degenerate = true;
    } else {
      rep.r_hat[j] = std::sqrt(pooled / sw);
    }
    sum_r += rep.r_hat[j];
    max_r = std::max(max_r, rep.r_hat[j]);
  }
  rep.mean_r_hat = sum_r / static_cast<double>(d);
  rep.max_r_hat = max_r;
  return rep;
}

AutocorrReport autocorrelation(const ChainEnsemble& e, std::size_t max_lag) {
  e.validate();
  const std::size_t n = e.kept_steps();
  if (max_lag >= n)
    throw DomainError("autocorrelation: max_lag must be below the kept length");
  AutocorrReport rep;
  rep.max_lag = max_lag;
  rep.mean.assign(max_lag + 1, 0.0);
  rep.mean_abs.assign(max_lag + 1, 0.0);
  rep.min.assign(max_lag + 1, std::numeric_limits<double>::infinity());
  rep.max.assign(max_lag + 1, -std::numeric_limits<double>::infinity());
  std::size_t used = 0;
  std::vector<double> series(n);
  for (std::size_t c = 0; c < e.chains; ++c) {
    for (std::size_t j = 0; j < e.dim; ++j) {
      double mean = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        series[t] = e.at(c, e.burn_in + t, j);
        mean += series[t];
      }
      if (all_equal(series.data(), n)) {
        ++rep.excluded_series;
        continue;
      }
      mean /= static_cast<double>(n);
      double denom = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        series[t] -= mean;
        denom += series[t] * series[t];
      }
      if (denom == 0.0) {
        // Sub-epsilon spreads can underflow the sum of squares to zero.
        ++rep.excluded_series;
        continue;
      }
      ++used;
      for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        double acc = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t)
          acc += series[t] * series[t + lag];
        const double rho = acc / denom;
        rep.mean[lag] += rho;
        rep.mean_abs[lag] += std::abs(rho);
        rep.min[lag] = std::min(rep.min[lag], rho);
        rep.max[lag] = std::max(rep.max[lag], rho);
      }
    }
  }
  if (used == 0)
    throw DomainError("autocorrelation: every series is constant");
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    rep.mean[lag] /= static_cast<double>(used);
    rep.mean_abs[lag] /= static_cast<double>(used);
  }
  return rep;
}

ModeCoverage mode_coverage(const Tensor& samples, const Tensor& centers,
                           double radius) {
  if (samples.rank() != 2 || centers.rank() != 2 ||
      samples.cols() != centers.cols())
    throw ShapeError("mode_coverage: samples and centers must share [*, dim]");
  if (radius <= 0.0) throw DomainError("mode_coverage: radius must be positive");
  const std::size_t k = centers.rows();
  ModeCoverage cov;
  cov.counts.assign(k, 0);
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const double* x = samples.row_ptr(i);
    double best = std::numeric_limits<double>::infinity();
    std::size_t pick = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double* mu = centers.row_ptr(c);
      double sq = 0.0;
      for (std::size_t j = 0; j < samples.cols(); ++j) {
        const double dv = x[j] - mu[j];
        sq += dv * dv;
      }
      if (sq < best) {
        best = sq;
        pick = c;
      }
    }
    if (std::sqrt(best) <= radius)
      ++cov.counts[pick];
    else
      ++cov.unassigned;
  }
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    assigned += cov.counts[c];
    if (cov.counts[c] > 0) ++cov.visited;
  }
  if (assigned > 0) {
    for (std::size_t c = 0; c < k; ++c) {
      if (cov.counts[c] == 0) continue;
      const double p =
          static_cast<double>(cov.counts[c]) / static_cast<double>(assigned);
      cov.entropy -= p * std::log(p);
    }
  }
  return cov;
}

double mean_acceptance(const ChainEnsemble& e) {
  e.validate();
  std::size_t acc = 0, total = 0;
  for (std::size_t c = 0; c < e.chains; ++c) {
    for (std::size_t t = e.burn_in; t < e.steps; ++t) {
      acc += e.accepted[e.scalar_index(c, t)];
      ++total;
    }
  }
  return static_cast<double>(acc) / static_cast<double>(total);
}

}  // namespace febm
