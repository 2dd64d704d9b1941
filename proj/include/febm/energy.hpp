#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "febm/density.hpp"
#include "febm/flow.hpp"
#include "febm/nn.hpp"

namespace febm {

struct EnergyConfig {
  std::size_t dim = 2;
  std::size_t hidden_layers = 3;
  std::size_t hidden_width = 128;
};

// Scalar correction network f. hidden_layers = 0 degenerates to a single
// linear map, which the analytic-tilt tests rely on.
class EnergyModel {
 public:
  EnergyModel() = default;
  explicit EnergyModel(EnergyConfig cfg);

  const EnergyConfig& config() const { return cfg_; }
  std::size_t dim() const { return cfg_.dim; }

  // Xavier hidden layers, zeroed output layer: f starts identically zero, so
  // an untrained tilt leaves the backbone untouched.
  void init_weights(Rng& rng);

  std::vector<NamedParam> params();
  std::vector<Var> bind(Tape& tape, bool requires_grad) const;

  // f per row; x is [B, dim], result [B, 1].
  Var value_t(Tape& tape, const std::vector<Var>& vars, Var x) const;
  Tensor value(const Tensor& x) const;

 private:
  EnergyConfig cfg_;
  Mlp net_;
};

// The tilted pair: log p(x) = f(x) + log q(x) up to a constant in data space,
// and, pulled back through x = g(z), log p(z) = f(g(z)) + log q0(z) up to the
// same constant. The latter needs neither the inverse map nor the Jacobian.
// Holds non-owning references; the flow is treated as frozen.
class TiltedModel {
 public:
  TiltedModel(const FlowModel& flow, const EnergyModel& energy);

  const FlowModel& flow() const { return *flow_; }
  const EnergyModel& energy() const { return *energy_; }
  std::size_t dim() const { return flow_->dim(); }

  // Tape graphs; fvars/evars come from flow().bind / energy().bind.
  Var log_p_z_unnorm_t(Tape& tape, const std::vector<Var>& fvars,
                       const std::vector<Var>& evars, Var z) const;
  Var log_p_x_unnorm_t(Tape& tape, const std::vector<Var>& fvars,
                       const std::vector<Var>& evars, Var x) const;

  // Plain per-row evaluations, [B, 1]; throw on non-finite output.
  Tensor log_p_z_unnorm(const Tensor& z) const;
  Tensor log_p_x_unnorm(const Tensor& x) const;
  // Gradient of the latent log-density at each row, [B, dim].
  Tensor grad_z_log_p(const Tensor& z) const;

 private:
  const FlowModel* flow_;
  const EnergyModel* energy_;
};

// Latent-space sampler target: rows of f(g(z)) + log q0(z).
class LatentTiltedDensity final : public TargetDensity {
 public:
  explicit LatentTiltedDensity(const TiltedModel& model) : model_(&model) {}
  std::size_t dim() const override { return model_->dim(); }
  void logp_grad(const Tensor& z, Tensor* logp, Tensor* grad) const override;

 private:
  const TiltedModel* model_;
};

// Data-space baseline target: rows of f(x) + log q(x); every evaluation runs
// the flow inverse and its log-det.
class DataTiltedDensity final : public TargetDensity {
 public:
  explicit DataTiltedDensity(const TiltedModel& model) : model_(&model) {}
  std::size_t dim() const override { return model_->dim(); }
  void logp_grad(const Tensor& x, Tensor* logp, Tensor* grad) const override;

 private:
  const TiltedModel* model_;
};

}  // namespace febm
