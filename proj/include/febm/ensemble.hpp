#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "febm/errors.hpp"

namespace febm {

// Recorded output of a multi-chain run: chains x steps x dim positions plus
// per-record scalars. "energy" is the target's unnormalized log-density at
// the recorded position. burn_in and stride are in recorded units: entry t of
// a chain was taken at raw step (t + 1) * stride, and entries t < burn_in
// belong to the warm-up segment diagnostics discard.
struct ChainEnsemble {
  std::size_t chains = 0;
  std::size_t steps = 0;
  std::size_t dim = 0;
  std::size_t burn_in = 0;
  std::size_t stride = 1;
  std::vector<double> z;               // [chains * steps * dim]
  std::vector<double> energy;          // [chains * steps]
  std::vector<std::uint8_t> accepted;  // [chains * steps]
  std::vector<double> step_size;       // [chains * steps]

  static ChainEnsemble empty(std::size_t chains, std::size_t steps,
                             std::size_t dim) {
    ChainEnsemble e;
    e.chains = chains;
    e.steps = steps;
    e.dim = dim;
    e.z.assign(chains * steps * dim, 0.0);
    e.energy.assign(chains * steps, 0.0);
    e.accepted.assign(chains * steps, 0);
    e.step_size.assign(chains * steps, 0.0);
    return e;
  }

  double& at(std::size_t c, std::size_t t, std::size_t j) {
    return z[(c * steps + t) * dim + j];
  }
  double at(std::size_t c, std::size_t t, std::size_t j) const {
    return z[(c * steps + t) * dim + j];
  }
  std::size_t scalar_index(std::size_t c, std::size_t t) const {
    return c * steps + t;
  }

  // Recorded steps after the warm-up marker.
  std::size_t kept_steps() const { return steps - burn_in; }

  void validate() const {
    if (chains == 0 || steps == 0 || dim == 0)
      throw ShapeError("ChainEnsemble: empty ensemble");
    if (burn_in >= steps)
      throw ShapeError("ChainEnsemble: burn-in covers every recorded step");
    if (z.size() != chains * steps * dim || energy.size() != chains * steps ||
        accepted.size() != chains * steps ||
        step_size.size() != chains * steps)
      throw ShapeError("ChainEnsemble: storage does not match extents");
  }
};

}  // namespace febm
