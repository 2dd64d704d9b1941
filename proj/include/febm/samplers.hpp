#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "febm/density.hpp"
#include "febm/energy.hpp"
#include "febm/ensemble.hpp"
#include "febm/rng.hpp"
#include "febm/tensor.hpp"

namespace febm {

struct HmcConfig {
  std::size_t leapfrog_steps = 3;
  std::size_t steps_per_call = 20;  // proposals per training-time sweep
  double step_size0 = 0.15;
  double target_accept = 0.651;
  double adapt_gain = 0.01;
  double step_size_min = 1e-6;
  double step_size_max = 1e2;
  bool adapt = true;

  void validate() const;
};

// One persistent chain. The rng stream is private to the chain, so advancing
// chains in lockstep or one at a time consumes identical randomness per chain
// and produces bitwise-identical trajectories.
struct ChainState {
  Tensor z;  // [dim]
  double step_size = 0.15;
  std::uint64_t proposals = 0;
  std::uint64_t accepts = 0;
  std::uint64_t divergences = 0;
  Rng rng;

  double accept_rate() const {
    return proposals == 0
               ? 0.0
               : static_cast<double>(accepts) / static_cast<double>(proposals);
  }
};

// m chains with positions drawn from the standard-normal prior, each on its
// own rng stream derived from run_seed.
std::vector<ChainState> init_chains(std::size_t count, std::size_t dim,
                                    std::uint64_t run_seed,
                                    double step_size0);

// Current positions stacked into one [chains, dim] batch.
Tensor chain_positions(const std::vector<ChainState>& chains);

// Symplectic leapfrog on H(z, p) = -log p(z) + |p|^2 / 2 with one step size
// per row; integrates Z and P in place for `steps` stages and optionally
// returns the target's log-density and gradient at the final position.
void leapfrog(const TargetDensity& target, Tensor& Z, Tensor& P,
              const std::vector<double>& eps, std::size_t steps,
              Tensor* final_logp = nullptr, Tensor* final_grad = nullptr);

// Advances every chain by `proposals` MH-corrected trajectories in lockstep
// (one batched target evaluation per leapfrog stage). Momentum is drawn
// fresh per proposal; the Hamiltonian uses unit mass. A non-finite
// Hamiltonian rejects the proposal and counts a divergence. When cfg.adapt
// is set, each chain's step size is nudged multiplicatively toward the
// target acceptance rate after every proposal.
void hmc_sweep(std::vector<ChainState>& chains, const TargetDensity& target,
               const HmcConfig& cfg, std::size_t proposals);

inline void hmc_step(std::vector<ChainState>& chains,
                     const TargetDensity& target, const HmcConfig& cfg) {
  hmc_sweep(chains, target, cfg, 1);
}

// Unadjusted overdamped update for every chain:
// z += (eps^2 / 2) grad log p(z) + eps * xi. Throws on a non-finite update,
// reporting the chain and its position.
void langevin_sweep(std::vector<ChainState>& chains,
                    const TargetDensity& target, double step_size,
                    std::size_t steps);

struct RecordingConfig {
  std::size_t steps = 2000;    // raw proposals per chain
  std::size_t burn_in = 400;   // raw steps; HMC adaptation freezes afterward
  std::size_t record_every = 1;

  void validate() const;
};

// Runs and records chains; the ensemble includes the warm-up segment with
// its marker set (in recorded units). Step-size adaptation is enabled during
// warm-up and frozen afterward, so the recorded post-warm-up segment comes
// from a fixed kernel.
ChainEnsemble run_chains_hmc(std::vector<ChainState>& chains,
                             const TargetDensity& target, HmcConfig cfg,
                             const RecordingConfig& rec);

ChainEnsemble run_chains_langevin(std::vector<ChainState>& chains,
                                  const TargetDensity& target,
                                  double step_size,
                                  const RecordingConfig& rec);

struct MagnetizedConfig {
  double gamma = 2.0;
  std::size_t steps = 1000;
  double dt = 0.01;

  void validate() const;
};

// Langevin path from z1 pulled toward z2 by a constant-magnitude drift:
// z += dt * (grad U(z) - gamma * (z - z2) / |z - z2|) + sqrt(2 dt) * xi,
// where U is the latent unnormalized log-density. Rows 0..steps inclusive
// (row 0 is z1); the magnetization term is dropped within 1e-8 of the anchor.
struct PathResult {
  Tensor z;               // [steps + 1, dim]
  Tensor x;               // [steps + 1, dim], pushed through the flow
  Tensor energy;          // [steps + 1, 1], U along the path
  Tensor dist_to_anchor;  // [steps + 1, 1]
};

PathResult magnetized_path(const Tensor& z1, const Tensor& z2,
                           const TiltedModel& model,
                           const MagnetizedConfig& cfg, Rng& rng);

}  // namespace febm
