#include "febm/trainers.hpp"

#include <cmath>
#include <string>

#include "febm/errors.hpp"
#include "febm/nn.hpp"
#include "febm/optim.hpp"

namespace febm {

void NtTrainConfig::validate() const {
  if (iterations < 1) throw DomainError("NtTrainConfig: iterations must be >= 1");
  if (learning_rate <= 0.0)
    throw DomainError("NtTrainConfig: learning_rate must be positive");
  if (batch_size < 1) throw DomainError("NtTrainConfig: batch_size must be >= 1");
  if (clip_norm <= 0.0) throw DomainError("NtTrainConfig: clip_norm must be positive");
  hmc.validate();
}

void NceTrainConfig::validate() const {
  if (iterations < 1) throw DomainError("NceTrainConfig: iterations must be >= 1");
  if (learning_rate <= 0.0)
    throw DomainError("NceTrainConfig: learning_rate must be positive");
  if (batch_size < 1) throw DomainError("NceTrainConfig: batch_size must be >= 1");
  if (!(rho > 0.0 && rho < 1.0))
    throw DomainError("NceTrainConfig: rho must lie in (0, 1)");
  if (clip_norm <= 0.0) throw DomainError("NceTrainConfig: clip_norm must be positive");
}

EbmGrad ebm_grad_estimate(const EnergyModel& energy, const Tensor& data_batch,
                          const Tensor& synth_batch) {
  const std::size_t d = energy.dim();
  if (data_batch.rank() != 2 || data_batch.cols() != d ||
      synth_batch.rank() != 2 || synth_batch.cols() != d)
    throw ShapeError("ebm_grad_estimate: batches must be [rows, dim]");
  Tape tape;
  std::vector<Var> evars = energy.bind(tape, true);
  Var f_data = energy.value_t(tape, evars, tape.leaf(data_batch));
  Var f_synth = energy.value_t(tape, evars, tape.leaf(synth_batch));
  Var gap = sub(mean(f_data), mean(f_synth));
  EbmGrad out;
  out.gap = tape.value(gap).item();
  GradientMap gm = tape.backward(gap);
  out.grads.reserve(evars.size());
  for (const Var& v : evars) out.grads.push_back(gm.at(v));
  return out;
}

NtTrainResult nt_ebm_train(const FlowModel& flow, EnergyModel& energy,
                           const Tensor& data, const NtTrainConfig& cfg,
                           std::uint64_t run_seed) {
  cfg.validate();
  if (flow.dim() != energy.dim())
    throw ShapeError("nt_ebm_train: flow and energy dimensions differ");
  if (data.rank() != 2 || data.cols() != flow.dim())
    throw ShapeError("nt_ebm_train: data must be [rows, dim]");
  std::vector<NamedParam> params = energy.params();
  Adam opt({cfg.learning_rate, 0.99, 0.999, 1e-8, cfg.weight_decay}, params);
  const TiltedModel tilted(flow, energy);
  const LatentTiltedDensity target(tilted);
  std::vector<ChainState> chains = init_chains(
      cfg.batch_size, flow.dim(), run_seed, cfg.hmc.step_size0);
  // Distinct stream tag far above any chain index.
  Rng batch_rng(chain_seed(run_seed, 0x6D696E6962617463ULL));
  NtTrainResult res;
  res.energy_gap.reserve(cfg.iterations);
  res.accept_rate.reserve(cfg.iterations);
  res.mean_step_size.reserve(cfg.iterations);
  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    std::uint64_t prop0 = 0, acc0 = 0;
    for (const ChainState& c : chains) {
      prop0 += c.proposals;
      acc0 += c.accepts;
    }
    hmc_sweep(chains, target, cfg.hmc, cfg.hmc.steps_per_call);
    std::uint64_t prop1 = 0, acc1 = 0;
    double eps_sum = 0.0;
    for (const ChainState& c : chains) {
      prop1 += c.proposals;
      acc1 += c.accepts;
      eps_sum += c.step_size;
    }
    const Tensor synth = flow.forward(chain_positions(chains));
    const Tensor batch = sample_rows(data, cfg.batch_size, batch_rng);
    EbmGrad est = ebm_grad_estimate(energy, batch, synth);
    // Ascent on the gap objective via Adam descent on its negation.
    for (Tensor& g : est.grads)
      for (std::size_t k = 0; k < g.size(); ++k) g.data()[k] = -g.data()[k];
    const double gnorm = clip_global_norm(est.grads, cfg.clip_norm);
    if (!std::isfinite(gnorm) || !std::isfinite(est.gap))
      throw NumericalError("nt_ebm_train: non-finite gradient at iteration " +
                           std::to_string(iter));
    opt.step(params, est.grads);
    res.energy_gap.push_back(est.gap);
    res.accept_rate.push_back(static_cast<double>(acc1 - acc0) /
                              static_cast<double>(prop1 - prop0));
    res.mean_step_size.push_back(eps_sum /
                                 static_cast<double>(chains.size()));
  }
  res.chains = std::move(chains);
  return res;
}

NceTrainResult nce_train(const FlowModel& flow, EnergyModel& energy,
                         const Tensor& data, const NceTrainConfig& cfg,
                         std::uint64_t run_seed) {
  cfg.validate();
  if (flow.dim() != energy.dim())
    throw ShapeError("nce_train: flow and energy dimensions differ");
  if (data.rank() != 2 || data.cols() != flow.dim())
    throw ShapeError("nce_train: data must be [rows, dim]");
  const std::size_t n_pos = cfg.batch_size;
  const std::size_t n_neg = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround(static_cast<double>(n_pos) * (1.0 - cfg.rho) /
                          cfg.rho)));
  Tensor bias = Tensor::scalar(cfg.bias_init);
  std::vector<NamedParam> params = energy.params();
  params.push_back({"nce.bias", &bias});
  Adam opt({cfg.learning_rate, 0.99, 0.999, 1e-8, cfg.weight_decay}, params);
  Rng batch_rng(chain_seed(run_seed, 0x706F737374726EULL));
  Rng noise_rng(chain_seed(run_seed, 0x6E656761747672ULL));
  const double inv_total = 1.0 / static_cast<double>(n_pos + n_neg);
  NceTrainResult res;
  res.loss_trace.reserve(cfg.iterations);
  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    const Tensor pos = sample_rows(data, n_pos, batch_rng);
    const Tensor neg_x = flow.sample(n_neg, noise_rng).second;
    Tape tape;
    Binding bound(tape, params, true);
    std::vector<Var> evars(bound.vars().begin(), bound.vars().end() - 1);
    Var bias_v = bound.vars().back();
    Var logit_pos =
        add(energy.value_t(tape, evars, tape.leaf(pos)), bias_v);
    Var logit_neg =
        add(energy.value_t(tape, evars, tape.leaf(neg_x)), bias_v);
    Var loss = scale(add(sum(neg(log_sigmoid(logit_pos))),
                         sum(softplus(logit_neg))),
                     inv_total);
    const double loss_v = tape.value(loss).item();
    if (!std::isfinite(loss_v))
      throw NumericalError("nce_train: non-finite loss at iteration " +
                           std::to_string(iter));
    GradientMap gm = tape.backward(loss);
    std::vector<Tensor> grads = bound.grads(gm);
    clip_global_norm(grads, cfg.clip_norm);
    opt.step(params, grads);
    res.loss_trace.push_back(loss_v);
  }
  res.bias = bias[0];
  return res;
}

}  // namespace febm
