#include "febm/targets.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "febm/errors.hpp"
#include "febm/parallel.hpp"

namespace febm {

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty())
    throw DomainError("GaussianMixture: at least one component required");
  dim_ = components_[0].mean.size();
  double wsum = 0.0;
  for (const MixtureComponent& c : components_) {
    if (c.mean.rank() != 1 || c.mean.size() != dim_)
      throw ShapeError("GaussianMixture: component mean shape mismatch");
    if (c.sigma <= 0.0)
      throw DomainError("GaussianMixture: sigma must be positive");
    if (c.weight <= 0.0)
      throw DomainError("GaussianMixture: weights must be positive");
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    for (MixtureComponent& c : components_) c.weight /= wsum;
}

GaussianMixture GaussianMixture::ring(std::size_t modes, double radius,
                                      double sigma) {
  if (modes < 1) throw DomainError("ring: modes must be >= 1");
  std::vector<MixtureComponent> comps;
  const double w = 1.0 / static_cast<double>(modes);
  for (std::size_t k = 0; k < modes; ++k) {
    const double a =
        2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(modes);
    comps.push_back({Tensor({2}, {radius * std::cos(a), radius * std::sin(a)}),
                     sigma, w});
  }
  return GaussianMixture(std::move(comps));
}

GaussianMixture GaussianMixture::grid(std::size_t side, double spacing,
                                      double sigma) {
  if (side < 1) throw DomainError("grid: side must be >= 1");
  std::vector<MixtureComponent> comps;
  const double w = 1.0 / static_cast<double>(side * side);
  const double off = 0.5 * spacing * static_cast<double>(side - 1);
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j)
      comps.push_back({Tensor({2}, {spacing * static_cast<double>(i) - off,
                                    spacing * static_cast<double>(j) - off}),
                       sigma, w});
  return GaussianMixture(std::move(comps));
}

GaussianMixture GaussianMixture::two_moons(std::size_t modes_per_arc,
                                           double radius, double sigma) {
  if (modes_per_arc < 2)
    throw DomainError("two_moons: modes_per_arc must be >= 2");
  std::vector<MixtureComponent> comps;
  const double w = 1.0 / static_cast<double>(2 * modes_per_arc);
  // Upper arc opens downward, lower arc opens upward, offset to interleave.
  for (std::size_t k = 0; k < modes_per_arc; ++k) {
    const double a = std::numbers::pi * static_cast<double>(k) /
                     static_cast<double>(modes_per_arc - 1);
    comps.push_back({Tensor({2}, {radius * std::cos(a) - 0.5 * radius,
                                  radius * std::sin(a) - 0.25 * radius}),
                     sigma, w});
    comps.push_back({Tensor({2}, {radius - radius * std::cos(a) - 0.5 * radius,
                                  0.25 * radius - radius * std::sin(a)}),
                     sigma, w});
  }
  return GaussianMixture(std::move(comps));
}

double GaussianMixture::logp_row(const double* x) const {
  // log-sum-exp over component log-densities.
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(components_.size());
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const MixtureComponent& c = components_[k];
    double sq = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double d = x[j] - c.mean[j];
      sq += d * d;
    }
    const double s2 = c.sigma * c.sigma;
    terms[k] = std::log(c.weight) -
               0.5 * static_cast<double>(dim_) *
                   std::log(2.0 * std::numbers::pi * s2) -
               0.5 * sq / s2;
    best = std::max(best, terms[k]);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - best);
  return best + std::log(acc);
}

void GaussianMixture::grad_row(const double* x, double* out) const {
  // Score = responsibility-weighted sum of per-component scores.
  std::vector<double> terms(components_.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const MixtureComponent& c = components_[k];
    double sq = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double d = x[j] - c.mean[j];
      sq += d * d;
    }
    const double s2 = c.sigma * c.sigma;
    terms[k] = std::log(c.weight) -
               0.5 * static_cast<double>(dim_) *
                   std::log(2.0 * std::numbers::pi * s2) -
               0.5 * sq / s2;
    best = std::max(best, terms[k]);
  }
  double norm = 0.0;
  for (double t : terms) norm += std::exp(t - best);
  for (std::size_t j = 0; j < dim_; ++j) out[j] = 0.0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const MixtureComponent& c = components_[k];
    const double r = std::exp(terms[k] - best) / norm;
    const double s2 = c.sigma * c.sigma;
    for (std::size_t j = 0; j < dim_; ++j)
      out[j] += r * (c.mean[j] - x[j]) / s2;
  }
}

Tensor GaussianMixture::logp(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != dim_)
    throw ShapeError("GaussianMixture::logp: expected [batch, dim]");
  Tensor out = Tensor::zeros({x.rows(), 1});
  parallel_for(
      x.rows(), [&](std::size_t i) { out[i] = logp_row(x.row_ptr(i)); }, 64);
  return out;
}

Tensor GaussianMixture::sample(std::size_t count, Rng& rng) const {
  if (count < 1) throw DomainError("GaussianMixture::sample: count must be >= 1");
  Tensor out = Tensor::zeros({count, dim_});
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t pick = components_.size() - 1;
    for (std::size_t k = 0; k < components_.size(); ++k) {
      acc += components_[k].weight;
      if (u < acc) {
        pick = k;
        break;
      }
    }
    const MixtureComponent& c = components_[pick];
    double* row = out.row_ptr(i);
    for (std::size_t j = 0; j < dim_; ++j)
      row[j] = c.mean[j] + c.sigma * rng.normal();
  }
  return out;
}

Tensor GaussianMixture::mean() const {
  Tensor m = Tensor::zeros({dim_});
  for (const MixtureComponent& c : components_)
    for (std::size_t j = 0; j < dim_; ++j) m[j] += c.weight * c.mean[j];
  return m;
}

Tensor GaussianMixture::covariance() const {
  const Tensor m = mean();
  Tensor cov = Tensor::zeros({dim_, dim_});
  for (const MixtureComponent& c : components_) {
    for (std::size_t a = 0; a < dim_; ++a) {
      for (std::size_t b = 0; b < dim_; ++b) {
        double v = c.mean[a] * c.mean[b];
        if (a == b) v += c.sigma * c.sigma;
        cov.at(a, b) += c.weight * v;
      }
    }
  }
  for (std::size_t a = 0; a < dim_; ++a)
    for (std::size_t b = 0; b < dim_; ++b) cov.at(a, b) -= m[a] * m[b];
  return cov;
}

void MixtureDensity::logp_grad(const Tensor& z, Tensor* logp,
                               Tensor* grad) const {
  if (z.rank() != 2 || z.cols() != mix_->dim())
    throw ShapeError("MixtureDensity: expected [batch, dim]");
  if (logp) *logp = mix_->logp(z);
  if (grad) {
    Tensor g = Tensor::zeros(z.shape());
    parallel_for(
        z.rows(),
        [&](std::size_t i) { mix_->grad_row(z.row_ptr(i), g.row_ptr(i)); },
        64);
    *grad = std::move(g);
  }
}

GaussianMixture make_target(const TargetConfig& cfg) {
  if (cfg.kind == "ring")
    return GaussianMixture::ring(cfg.modes, cfg.radius, cfg.sigma);
  if (cfg.kind == "grid")
    return GaussianMixture::grid(cfg.side, cfg.spacing, cfg.sigma);
  if (cfg.kind == "two-moons")
    return GaussianMixture::two_moons(cfg.modes, cfg.radius, cfg.sigma);
  throw ConfigError("unknown target kind '" + cfg.kind +
                    "' (expected ring, grid or two-moons)");
}

}  // namespace febm
