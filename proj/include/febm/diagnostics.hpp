#pragma once

#include <cstddef>
#include <vector>

#include "febm/ensemble.hpp"
#include "febm/tensor.hpp"

namespace febm {

// Per-coordinate potential-scale-reduction report. Computed on the recorded
// segment after the ensemble's warm-up marker. A coordinate whose
// within-chain variance vanishes gets an infinite ratio and sets the
// degenerate flag.
struct GrReport {
  std::vector<double> r_hat;
  std::vector<double> within_var;   // s_w^2 per coordinate
  std::vector<double> between_var;  // s_b^2 per coordinate
  std::vector<double> pooled_var;   // sigma-hat^2 per coordinate
  double mean_r_hat = 0.0;
  double max_r_hat = 0.0;
  bool degenerate = false;
};

// Requires >= 2 chains and >= 2 kept steps. Within-chain variance is the
// mean of unbiased per-chain variances; between-chain variance is the
// n-scaled variance of chain means; the pooled estimate blends them as
// ((n - 1) / n) s_w^2 + s_b^2 / n and the ratio is sqrt(pooled / within).
GrReport gelman_rubin(const ChainEnsemble& ensemble);

// Lag autocorrelations of every (chain, coordinate) series past the warm-up
// marker, aggregated per lag to a mean line with a min/max band. Series with
// zero variance are excluded and counted.
struct AutocorrReport {
  std::size_t max_lag = 0;
  std::vector<double> mean;      // indexed by lag, 0..max_lag
  std::vector<double> mean_abs;  // mean of |rho| per lag
  std::vector<double> min;
  std::vector<double> max;
  std::size_t excluded_series = 0;
};

AutocorrReport autocorrelation(const ChainEnsemble& ensemble,
                               std::size_t max_lag);

// Nearest-center assignment within a radius; entropy is the natural-log
// entropy of the assigned-count histogram.
struct ModeCoverage {
  std::vector<std::size_t> counts;
  std::size_t unassigned = 0;
  std::size_t visited = 0;  // centers with at least one sample
  double entropy = 0.0;
};

ModeCoverage mode_coverage(const Tensor& samples, const Tensor& centers,
                           double radius);

// Ensemble-wide acceptance fraction over recorded steps past the marker.
double mean_acceptance(const ChainEnsemble& ensemble);

}  // namespace febm
