#include "febm/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "febm/errors.hpp"

namespace febm {

void HmcConfig::validate() const {
  if (leapfrog_steps < 1)
    throw DomainError("HmcConfig: leapfrog_steps must be >= 1");
  if (steps_per_call < 1)
    throw DomainError("HmcConfig: steps_per_call must be >= 1");
  if (step_size0 <= 0.0) throw DomainError("HmcConfig: step_size0 must be positive");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw DomainError("HmcConfig: target_accept must lie in (0, 1)");
  if (step_size_min <= 0.0 || step_size_max < step_size_min)
    throw DomainError("HmcConfig: bad step-size clamp range");
}

void RecordingConfig::validate() const {
  if (steps < 1) throw DomainError("RecordingConfig: steps must be >= 1");
  if (record_every < 1)
    throw DomainError("RecordingConfig: record_every must be >= 1");
  if (burn_in >= steps)
    throw DomainError("RecordingConfig: burn_in must be below steps");
}

void MagnetizedConfig::validate() const {
  if (gamma < 0.0) throw DomainError("MagnetizedConfig: gamma must be >= 0");
  if (steps < 1) throw DomainError("MagnetizedConfig: steps must be >= 1");
  if (dt <= 0.0) throw DomainError("MagnetizedConfig: dt must be positive");
}

std::vector<ChainState> init_chains(std::size_t count, std::size_t dim,
                                    std::uint64_t run_seed,
                                    double step_size0) {
  if (count < 1) throw ShapeError("init_chains: count must be >= 1");
  if (dim < 1) throw ShapeError("init_chains: dim must be >= 1");
  if (step_size0 <= 0.0)
    throw DomainError("init_chains: step_size0 must be positive");
  std::vector<ChainState> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ChainState c;
    c.rng = Rng(chain_seed(run_seed, i));
    c.z = Tensor::zeros({dim});
    for (std::size_t j = 0; j < dim; ++j) c.z[j] = c.rng.normal();
    c.step_size = step_size0;
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

void check_chains(const std::vector<ChainState>& chains, std::size_t dim,
                  const char* who) {
  if (chains.empty()) throw ShapeError(std::string(who) + ": no chains");
  for (const ChainState& c : chains)
    if (c.z.rank() != 1 || c.z.extent(0) != dim)
      throw ShapeError(std::string(who) + ": chain dimension mismatch");
}

Tensor gather(const std::vector<ChainState>& chains, std::size_t dim) {
  Tensor Z = Tensor::zeros({chains.size(), dim});
  for (std::size_t i = 0; i < chains.size(); ++i) {
    double* dst = Z.row_ptr(i);
    for (std::size_t j = 0; j < dim; ++j) dst[j] = chains[i].z[j];
  }
  return Z;
}

void scatter(std::vector<ChainState>& chains, const Tensor& Z) {
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const double* src = Z.row_ptr(i);
    for (std::size_t j = 0; j < Z.cols(); ++j) chains[i].z[j] = src[j];
  }
}

struct Sink {
  ChainEnsemble* ensemble;
  std::size_t record_every;
  std::size_t slot = 0;
};

void record(Sink& sink, const std::vector<ChainState>& chains, const Tensor& Z,
            const Tensor& logp, const std::vector<std::uint8_t>& accepted) {
  ChainEnsemble& e = *sink.ensemble;
  const std::size_t t = sink.slot++;
  for (std::size_t c = 0; c < e.chains; ++c) {
    for (std::size_t j = 0; j < e.dim; ++j) e.at(c, t, j) = Z.at(c, j);
    const std::size_t idx = e.scalar_index(c, t);
    e.energy[idx] = logp[c];
    e.accepted[idx] = accepted[c];
    e.step_size[idx] = chains[c].step_size;
  }
}

void leapfrog_impl(const TargetDensity& target, Tensor& Z, Tensor& P,
                   const std::vector<double>& eps, std::size_t steps,
                   const Tensor* grad0, Tensor* final_logp,
                   Tensor* final_grad) {
  const std::size_t m = Z.rows(), d = Z.cols();
  Tensor g;
  if (grad0)
    g = *grad0;
  else
    target.logp_grad(Z, nullptr, &g);
  for (std::size_t i = 0; i < m; ++i) {
    double* p = P.row_ptr(i);
    const double* gr = g.row_ptr(i);
    for (std::size_t j = 0; j < d; ++j) p[j] += 0.5 * eps[i] * gr[j];
  }
  Tensor logp1, grad1;
  for (std::size_t l = 1; l <= steps; ++l) {
    for (std::size_t i = 0; i < m; ++i) {
      double* z = Z.row_ptr(i);
      const double* p = P.row_ptr(i);
      for (std::size_t j = 0; j < d; ++j) z[j] += eps[i] * p[j];
    }
    const bool last = (l == steps);
    target.logp_grad(Z, (last && final_logp) ? &logp1 : nullptr, &grad1);
    const double factor = last ? 0.5 : 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      double* p = P.row_ptr(i);
      const double* gr = grad1.row_ptr(i);
      for (std::size_t j = 0; j < d; ++j) p[j] += factor * eps[i] * gr[j];
    }
  }
  if (final_logp) *final_logp = std::move(logp1);
  if (final_grad) *final_grad = std::move(grad1);
}

// Advances all chains raw_steps proposals; adapts step sizes through raw step
// adapt_until; records through the sink if present. The target's log-density
// and gradient at the current positions are carried across proposals, so each
// proposal costs exactly leapfrog_steps target evaluations.
void hmc_drive(std::vector<ChainState>& chains, const TargetDensity& target,
               const HmcConfig& cfg, std::size_t raw_steps,
               std::size_t adapt_until, Sink* sink) {
  const std::size_t m = chains.size(), d = target.dim();
  Tensor Z = gather(chains, d);
  Tensor logp, grad;
  target.logp_grad(Z, &logp, &grad);
  Tensor P = Tensor::zeros({m, d});
  std::vector<double> H0(m), eps(m);
  std::vector<std::uint8_t> accepted(m, 0);
  for (std::size_t t = 1; t <= raw_steps; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      ChainState& c = chains[i];
      double* p = P.row_ptr(i);
      double ksq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        p[j] = c.rng.normal();
        ksq += p[j] * p[j];
      }
      eps[i] = c.step_size;
      H0[i] = -logp[i] + 0.5 * ksq;
    }
    Tensor Zp = Z;
    Tensor Pp = P;
    Tensor logp1, grad1;
    leapfrog_impl(target, Zp, Pp, eps, cfg.leapfrog_steps, &grad, &logp1,
                  &grad1);
    for (std::size_t i = 0; i < m; ++i) {
      ChainState& c = chains[i];
      const double* p = Pp.row_ptr(i);
      double ksq = 0.0;
      for (std::size_t j = 0; j < d; ++j) ksq += p[j] * p[j];
      const double H1 = -logp1[i] + 0.5 * ksq;
      const double u = c.rng.uniform();
      const bool diverged = !std::isfinite(H0[i]) || !std::isfinite(H1);
      const bool accept = !diverged && u < std::exp(H0[i] - H1);
      ++c.proposals;
      if (diverged) ++c.divergences;
      if (accept) {
        ++c.accepts;
        double* zdst = Z.row_ptr(i);
        const double* zsrc = Zp.row_ptr(i);
        double* gdst = grad.row_ptr(i);
        const double* gsrc = grad1.row_ptr(i);
        for (std::size_t j = 0; j < d; ++j) {
          zdst[j] = zsrc[j];
          gdst[j] = gsrc[j];
        }
        logp[i] = logp1[i];
      }
      accepted[i] = accept ? 1 : 0;
      if (t <= adapt_until) {
        const double a = accept ? 1.0 : 0.0;
        c.step_size = std::clamp(
            c.step_size * std::exp(cfg.adapt_gain * (a - cfg.target_accept)),
            cfg.step_size_min, cfg.step_size_max);
      }
    }
    if (sink && t % sink->record_every == 0)
      record(*sink, chains, Z, logp, accepted);
  }
  scatter(chains, Z);
}

void langevin_drive(std::vector<ChainState>& chains,
                    const TargetDensity& target, double step_size,
                    std::size_t raw_steps, Sink* sink) {
  const std::size_t m = chains.size(), d = target.dim();
  Tensor Z = gather(chains, d);
  Tensor logp, grad;
  target.logp_grad(Z, nullptr, &grad);
  const std::vector<std::uint8_t> accepted(m, 1);
  for (std::size_t t = 1; t <= raw_steps; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      ChainState& c = chains[i];
      double* z = Z.row_ptr(i);
      const double* g = grad.row_ptr(i);
      for (std::size_t j = 0; j < d; ++j)
        z[j] += 0.5 * step_size * step_size * g[j] + step_size * c.rng.normal();
      ++c.proposals;
      ++c.accepts;
      c.step_size = step_size;
      for (std::size_t j = 0; j < d; ++j) {
        if (!std::isfinite(z[j])) {
          std::string pos = "[";
          for (std::size_t k = 0; k < d; ++k)
            pos += (k ? ", " : "") + std::to_string(z[k]);
          pos += "]";
          throw NumericalError("langevin: non-finite position in chain " +
                               std::to_string(i) + " at raw step " +
                               std::to_string(t) + ", position " + pos);
        }
      }
    }
    const bool rec_now = sink && t % sink->record_every == 0;
    target.logp_grad(Z, rec_now ? &logp : nullptr, &grad);
    if (rec_now) record(*sink, chains, Z, logp, accepted);
  }
  scatter(chains, Z);
}

}  // namespace

Tensor chain_positions(const std::vector<ChainState>& chains) {
  if (chains.empty()) throw ShapeError("chain_positions: no chains");
  return gather(chains, chains[0].z.size());
}

void leapfrog(const TargetDensity& target, Tensor& Z, Tensor& P,
              const std::vector<double>& eps, std::size_t steps,
              Tensor* final_logp, Tensor* final_grad) {
  if (Z.rank() != 2 || !Z.same_shape(P))
    throw ShapeError("leapfrog: Z and P must be matching [batch, dim]");
  if (eps.size() != Z.rows())
    throw ShapeError("leapfrog: one step size per row required");
  if (steps < 1) throw DomainError("leapfrog: steps must be >= 1");
  leapfrog_impl(target, Z, P, eps, steps, nullptr, final_logp, final_grad);
}

void hmc_sweep(std::vector<ChainState>& chains, const TargetDensity& target,
               const HmcConfig& cfg, std::size_t proposals) {
  cfg.validate();
  check_chains(chains, target.dim(), "hmc_sweep");
  if (proposals < 1) throw DomainError("hmc_sweep: proposals must be >= 1");
  const std::size_t adapt_until =
      cfg.adapt ? std::numeric_limits<std::size_t>::max() : 0;
  hmc_drive(chains, target, cfg, proposals, adapt_until, nullptr);
}

void langevin_sweep(std::vector<ChainState>& chains,
                    const TargetDensity& target, double step_size,
                    std::size_t steps) {
  check_chains(chains, target.dim(), "langevin_sweep");
  if (step_size <= 0.0)
    throw DomainError("langevin_sweep: step_size must be positive");
  if (steps < 1) throw DomainError("langevin_sweep: steps must be >= 1");
  langevin_drive(chains, target, step_size, steps, nullptr);
}

ChainEnsemble run_chains_hmc(std::vector<ChainState>& chains,
                             const TargetDensity& target, HmcConfig cfg,
                             const RecordingConfig& rec) {
  cfg.validate();
  rec.validate();
  check_chains(chains, target.dim(), "run_chains_hmc");
  const std::size_t recorded = rec.steps / rec.record_every;
  if (recorded == 0)
    throw DomainError("run_chains_hmc: record_every exceeds steps");
  ChainEnsemble e =
      ChainEnsemble::empty(chains.size(), recorded, target.dim());
  e.stride = rec.record_every;
  e.burn_in = rec.burn_in / rec.record_every;
  Sink sink{&e, rec.record_every, 0};
  hmc_drive(chains, target, cfg, rec.steps, cfg.adapt ? rec.burn_in : 0,
            &sink);
  e.validate();
  return e;
}

ChainEnsemble run_chains_langevin(std::vector<ChainState>& chains,
                                  const TargetDensity& target,
                                  double step_size,
                                  const RecordingConfig& rec) {
  rec.validate();
  check_chains(chains, target.dim(), "run_chains_langevin");
  if (step_size <= 0.0)
    throw DomainError("run_chains_langevin: step_size must be positive");
  const std::size_t recorded = rec.steps / rec.record_every;
  if (recorded == 0)
    throw DomainError("run_chains_langevin: record_every exceeds steps");
  ChainEnsemble e =
      ChainEnsemble::empty(chains.size(), recorded, target.dim());
  e.stride = rec.record_every;
  e.burn_in = rec.burn_in / rec.record_every;
  Sink sink{&e, rec.record_every, 0};
  langevin_drive(chains, target, step_size, rec.steps, &sink);
  e.validate();
  return e;
}

PathResult magnetized_path(const Tensor& z1, const Tensor& z2,
                           const TiltedModel& model,
                           const MagnetizedConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = model.dim();
  if (z1.rank() != 1 || z1.extent(0) != d || z2.rank() != 1 ||
      z2.extent(0) != d)
    throw ShapeError("magnetized_path: z1 and z2 must be [dim] vectors");
  const LatentTiltedDensity density(model);
  const std::size_t rows = cfg.steps + 1;
  Tensor path = Tensor::zeros({rows, d});
  Tensor energy = Tensor::zeros({rows, 1});
  Tensor dist = Tensor::zeros({rows, 1});
  Tensor cur = Tensor::zeros({1, d});
  for (std::size_t j = 0; j < d; ++j) cur.at(0, j) = z1[j];
  const double noise = std::sqrt(2.0 * cfg.dt);
  Tensor logp, grad;
  for (std::size_t t = 0; t < rows; ++t) {
    const bool last = (t + 1 == rows);
    density.logp_grad(cur, &logp, last ? nullptr : &grad);
    double dsq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      path.at(t, j) = cur.at(0, j);
      const double diff = cur.at(0, j) - z2[j];
      dsq += diff * diff;
    }
    energy[t] = logp[0];
    dist[t] = std::sqrt(dsq);
    if (!std::isfinite(energy[t]))
      throw NumericalError("magnetized_path: non-finite energy at step " +
                           std::to_string(t));
    if (last) break;
    const double dn = dist[t];
    for (std::size_t j = 0; j < d; ++j) {
      // Unit-vector pull toward the anchor; skipped at the singularity.
      const double pull =
          dn < 1e-8 ? 0.0 : cfg.gamma * (cur.at(0, j) - z2[j]) / dn;
      cur.at(0, j) +=
          cfg.dt * (grad.at(0, j) - pull) + noise * rng.normal();
    }
  }
  PathResult res;
  res.x = model.flow().forward(path);
  res.z = std::move(path);
  res.energy = std::move(energy);
  res.dist_to_anchor = std::move(dist);
  return res;
}

}  // namespace febm
