#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "febm/energy.hpp"
#include "febm/flow.hpp"
#include "febm/samplers.hpp"
#include "febm/tensor.hpp"

namespace febm {

struct NtTrainConfig {
  std::size_t iterations = 40000;  // ceiling for full-scale runs; 2-D
                                   // presets use far less
  double learning_rate = 5e-5;
  std::size_t batch_size = 64;  // observed batch; synthesized batch and
                                // persistent-chain count match it
  HmcConfig hmc;
  double clip_norm = 100.0;
  double weight_decay = 0.0;

  void validate() const;
};

struct NtTrainResult {
  std::vector<double> energy_gap;      // mean f(data) - mean f(synth)
  std::vector<double> accept_rate;     // per-iteration sweep acceptance
  std::vector<double> mean_step_size;  // across chains, end of iteration
  std::vector<ChainState> chains;      // final persistent chains
};

// Gradient of the sampled likelihood bound for the tilt: d/dtheta of
// [mean f(data) - mean f(synth)], plus that scalar gap. Gradient order
// matches energy.params().
struct EbmGrad {
  std::vector<Tensor> grads;
  double gap = 0.0;
};

EbmGrad ebm_grad_estimate(const EnergyModel& energy, const Tensor& data_batch,
                          const Tensor& synth_batch);

// Likelihood ascent on the tilt with sampling by latent-space HMC. Each
// iteration advances persistent chains hmc.steps_per_call proposals against
// the current tilted target, pushes their positions through the frozen flow
// to get the synthesized batch, and applies an Adam step on the negated
// gradient estimate (clipped in global norm). Chains start from the prior,
// seeded from run_seed; minibatch draws use an independent stream.
NtTrainResult nt_ebm_train(const FlowModel& flow, EnergyModel& energy,
                           const Tensor& data, const NtTrainConfig& cfg,
                           std::uint64_t run_seed);

struct NceTrainConfig {
  std::size_t iterations = 80000;  // ceiling for full-scale runs; 2-D
                                   // presets use far less
  double learning_rate = 1e-5;
  std::size_t batch_size = 128;  // positives per iteration
  double rho = 0.5;              // positive fraction; negatives per iteration
                                 // = batch_size * (1 - rho) / rho
  double bias_init = 0.0;
  double clip_norm = 100.0;
  double weight_decay = 0.0;

  void validate() const;
};

struct NceTrainResult {
  std::vector<double> loss_trace;  // per-iteration batch cross-entropy
  double bias = 0.0;               // learned normalizer-absorbing bias
};

// Logistic discrimination of data (label 1) against flow samples (label 0)
// with logit bias + f(x), minimized in the softplus / log-sigmoid form so
// extreme logits stay finite. Trains the tilt parameters and the bias
// jointly.
NceTrainResult nce_train(const FlowModel& flow, EnergyModel& energy,
                         const Tensor& data, const NceTrainConfig& cfg,
                         std::uint64_t run_seed);

}  // namespace febm
