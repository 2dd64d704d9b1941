#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "febm/density.hpp"
#include "febm/rng.hpp"
#include "febm/tensor.hpp"

namespace febm {

struct MixtureComponent {
  Tensor mean;    // [d]
  double sigma;   // isotropic standard deviation
  double weight;
};

// Isotropic Gaussian mixture with exact log-density, score and sampler. All
// built-in 2-D targets are instances, including the two-moons shape, which is
// a mixture of small components laid along two arcs so its density stays
// closed-form.
class GaussianMixture {
 public:
  explicit GaussianMixture(std::vector<MixtureComponent> components);

  static GaussianMixture ring(std::size_t modes, double radius, double sigma);
  static GaussianMixture grid(std::size_t side, double spacing, double sigma);
  static GaussianMixture two_moons(std::size_t modes_per_arc, double radius,
                                   double sigma);

  std::size_t dim() const { return dim_; }
  const std::vector<MixtureComponent>& components() const {
    return components_;
  }

  double logp_row(const double* x) const;
  void grad_row(const double* x, double* out) const;
  Tensor logp(const Tensor& x) const;  // [B, 1]
  Tensor sample(std::size_t count, Rng& rng) const;

  // Exact mixture moments, for moment-matching tests.
  Tensor mean() const;        // [d]
  Tensor covariance() const;  // [d, d]

 private:
  std::vector<MixtureComponent> components_;
  std::size_t dim_ = 0;
};

// Exact-density sampler target wrapping a mixture; the analytic reference the
// learned models are measured against.
class MixtureDensity final : public TargetDensity {
 public:
  explicit MixtureDensity(const GaussianMixture& mix) : mix_(&mix) {}
  std::size_t dim() const override { return mix_->dim(); }
  void logp_grad(const Tensor& z, Tensor* logp, Tensor* grad) const override;

 private:
  const GaussianMixture* mix_;
};

struct TargetConfig {
  std::string kind = "ring";  // ring | grid | two-moons
  std::size_t modes = 8;      // ring components / two-moons components per arc
  double radius = 4.0;        // ring or moon radius
  double sigma = 0.3;
  std::size_t side = 5;       // grid is side x side
  double spacing = 2.0;
};

GaussianMixture make_target(const TargetConfig& cfg);

}  // namespace febm
