#pragma once

#include <cstddef>

#include "febm/tensor.hpp"

namespace febm {

// Unnormalized log-density with gradient, evaluated batchwise; each row is an
// independent point, so a batched call equals per-row calls.
//
// Implementations must not throw on non-finite values: samplers watch for
// them and handle divergences themselves.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;

  virtual std::size_t dim() const = 0;

  // z is [B, dim]. Fills logp ([B, 1]) and/or grad ([B, dim]); either output
  // may be null, letting implementations skip the unneeded computation.
  virtual void logp_grad(const Tensor& z, Tensor* logp,
                         Tensor* grad) const = 0;

  Tensor logp(const Tensor& z) const {
    Tensor lp;
    logp_grad(z, &lp, nullptr);
    return lp;
  }
};

// Standard normal in d dimensions; the analytic reference for sampler tests.
class StdNormalDensity final : public TargetDensity {
 public:
  explicit StdNormalDensity(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  void logp_grad(const Tensor& z, Tensor* logp, Tensor* grad) const override;

 private:
  std::size_t dim_;
};

}  // namespace febm
