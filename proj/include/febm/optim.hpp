#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "febm/tensor.hpp"

namespace febm {

// Named reference to a parameter tensor owned by a model. Models list their
// parameters in a stable canonical order; optimizer state, gradients, tape
// bindings and checkpoints all follow that order.
struct NamedParam {
  std::string name;
  Tensor* value;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.99;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

// Bias-corrected Adam. step() applies one descent update in place; callers
// wanting ascent pass negated gradients.
class Adam {
 public:
  Adam(AdamConfig cfg, const std::vector<NamedParam>& params);

  void step(const std::vector<NamedParam>& params,
            const std::vector<Tensor>& grads);

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t step_ = 0;
};

// Scales grads in place to global norm <= max_norm; a clipped vector stays a
// positive multiple of the raw one. Returns the pre-clip global norm.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

}  // namespace febm
