// Release gate: one binary, one PASS/FAIL line per criterion with the
// measured numbers, exit status = number of failures.  Criteria 1-3 and 9
// share one trained ring-demo model; the remaining criteria run on analytic
// or randomized instances with independent oracles.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "febm/config.hpp"
#include "febm/diagnostics.hpp"
#include "febm/energy.hpp"
#include "febm/ensemble.hpp"
#include "febm/flow.hpp"
#include "febm/grid.hpp"
#include "febm/io.hpp"
#include "febm/samplers.hpp"
#include "febm/targets.hpp"
#include "febm/tensor.hpp"
#include "febm/trainers.hpp"
#include "test_util.hpp"

using namespace febm;
namespace fs = std::filesystem;

namespace {

// Stream tags mirror the command layer so the shared model below reproduces
// the CLI demo run bit for bit.
constexpr std::uint64_t kDataStream = 0x6461746167656eULL;
constexpr std::uint64_t kFlowInitStream = 0x666c6f77696e69ULL;
constexpr std::uint64_t kMleStream = 0x6d6c656261746bULL;
constexpr std::uint64_t kEnergyInitStream = 0x656e6572696e69ULL;
constexpr std::uint64_t kInterpStream = 0x696e74657270ULL;

// Ceiling for the guided-path energy band (criterion 9), frozen from a
// calibration run of this binary: observed band 7.4 on the reference seed,
// comfortably cleared by a 2x margin.
constexpr double kPathEnergyBandCeiling = 15.0;

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Kept (post warm-up) values of one coordinate, pooled across chains.
std::vector<double> kept_coordinate(const ChainEnsemble& e, std::size_t j) {
  std::vector<double> v;
  v.reserve(e.chains * e.kept_steps());
  for (std::size_t c = 0; c < e.chains; ++c)
    for (std::size_t t = e.burn_in; t < e.steps; ++t)
      v.push_back(e.at(c, t, j));
  return v;
}

// Recorded positions pushed through the flow, chunked so the throwaway
// forward tapes stay small.
ChainEnsemble map_through_flow(const ChainEnsemble& e, const FlowModel& flow) {
  ChainEnsemble out = e;
  const std::size_t rows = e.chains * e.steps;
  const std::size_t chunk = 8192;
  for (std::size_t r0 = 0; r0 < rows; r0 += chunk) {
    const std::size_t n = std::min(chunk, rows - r0);
    std::vector<double> buf(e.z.begin() + r0 * e.dim,
                            e.z.begin() + (r0 + n) * e.dim);
    const Tensor x = flow.forward(Tensor({n, e.dim}, std::move(buf)));
    std::copy(x.data(), x.data() + x.size(), out.z.begin() + r0 * e.dim);
  }
  return out;
}

bool bits_equal(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

// ---------------------------------------------------------------------------
// Shared ring-demo artifacts.

struct Demo {
  RunSettings s;
  Tensor data;
  FlowModel flow;        // small preset, likelihood-trained
  EnergyModel energy;    // transport-trained tilt
  ChainEnsemble hmc_z;   // latent-space chains
  ChainEnsemble hmc_x;   // same chains pushed to data space
  double seconds = 0.0;  // data + training + sampling wall time
};

Demo build_demo() {
  Config cfg;
  cfg.set("run.seed", "1");
  cfg.set("ebm_train.iterations", "400");
  Demo d{resolve_settings(cfg), {}, {}, {}, {}, {}, 0.0};
  const auto t0 = std::chrono::steady_clock::now();

  const GaussianMixture target = make_target(d.s.target);
  Rng data_rng(chain_seed(d.s.seed, kDataStream));
  d.data = target.sample(d.s.data_samples, data_rng);

  d.flow = FlowModel(d.s.flow);
  Rng init_rng(chain_seed(d.s.seed, kFlowInitStream));
  d.flow.init_weights(init_rng);
  Rng mle_rng(chain_seed(d.s.seed, kMleStream));
  train_flow_mle(d.flow, d.data, d.s.flow_train, mle_rng);

  d.energy = EnergyModel(d.s.energy);
  Rng energy_rng(chain_seed(d.s.seed, kEnergyInitStream));
  d.energy.init_weights(energy_rng);
  nt_ebm_train(d.flow, d.energy, d.data, d.s.ebm_train, d.s.seed);

  const TiltedModel model(d.flow, d.energy);
  const LatentTiltedDensity latent(model);
  std::vector<ChainState> chains =
      init_chains(d.s.sample_chains, model.dim(), d.s.seed, d.s.hmc.step_size0);
  d.hmc_z = run_chains_hmc(chains, latent, d.s.hmc, d.s.recording);
  d.hmc_x = map_through_flow(d.hmc_z, d.flow);

  d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t0).count();
  return d;
}

// ---------------------------------------------------------------------------
// Criteria.

// 1: 64 latent-space chains mix on the ring demo within a desk-time budget.
Outcome ring_demo_mixing(const Demo& d) {
  const GrReport gr = gelman_rubin(d.hmc_x);
  const bool ok = gr.mean_r_hat < 1.2 && d.seconds <= 600.0;
  return {ok, fmt("mean r-hat %.4f (bound 1.2), %zu chains x %zu, %.0f s "
                  "(bound 600)",
                  gr.mean_r_hat, d.hmc_x.chains, d.hmc_x.steps, d.seconds)};
}

// 2: on the same model, plain data-space Langevin mixes strictly worse on
// both the scale-reduction and the lag-200 autocorrelation axes.
Outcome data_space_mixes_slower(const Demo& d) {
  const TiltedModel model(d.flow, d.energy);
  const DataTiltedDensity data_target(model);
  std::vector<ChainState> chains =
      init_chains(d.s.sample_chains, model.dim(), d.s.seed, d.s.hmc.step_size0);
  const ChainEnsemble lang =
      run_chains_langevin(chains, data_target, d.s.langevin_step, d.s.recording);

  const double r_hmc = gelman_rubin(d.hmc_x).mean_r_hat;
  const double r_lang = gelman_rubin(lang).mean_r_hat;
  const double ac_hmc = autocorrelation(d.hmc_x, 200).mean_abs[200];
  const double ac_lang = autocorrelation(lang, 200).mean_abs[200];
  const bool ok = r_lang > r_hmc && ac_lang > ac_hmc;
  return {ok, fmt("r-hat %.3f > %.3f, |rho(200)| %.3f > %.4f",
                  r_lang, r_hmc, ac_lang, ac_hmc)};
}

// 3: the learned tilt tightens the backbone's grid-KL to the target by the
// calibrated factor, and a deeper backbone alone fits better than the small
// one at an equal training budget.
Outcome tilt_tightens_fit(const Demo& d) {
  const GaussianMixture target = make_target(d.s.target);
  const TiltedModel model(d.flow, d.energy);
  const DataTiltedDensity tilted(model);
  Grid2d grid;
  grid.nx = grid.ny = 240;
  grid.x0 = grid.y0 = -8.0;
  grid.x1 = grid.y1 = 8.0;

  const Tensor log_t = eval_log_density_grid(
      grid, [&](const Tensor& b) { return target.logp(b); });
  const Tensor log_q = eval_log_density_grid(
      grid, [&](const Tensor& b) { return d.flow.log_prob(b); });
  const Tensor log_p = eval_log_density_grid(
      grid, [&](const Tensor& b) { return tilted.logp(b); });
  const double kl_small = grid_kl(log_t, log_q);
  const double kl_tilted = grid_kl(log_t, log_p);

  FlowConfig mc = flow_preset("medium");
  mc.dim = d.flow.dim();
  FlowModel medium(mc);
  Rng init_rng(chain_seed(2, kFlowInitStream));
  medium.init_weights(init_rng);
  Rng mle_rng(chain_seed(2, kMleStream));
  train_flow_mle(medium, d.data, d.s.flow_train, mle_rng);
  const Tensor log_m = eval_log_density_grid(
      grid, [&](const Tensor& b) { return medium.log_prob(b); });
  const double kl_medium = grid_kl(log_t, log_m);

  const bool ok = kl_tilted <= 0.8 * kl_small && kl_medium < kl_small;
  return {ok, fmt("kl small %.3f, tilted %.3f (bound %.3f), medium %.3f",
                  kl_small, kl_tilted, 0.8 * kl_small, kl_medium)};
}

// 4: adaptive HMC leaves the analytic standard normal exactly invariant:
// per-coordinate KS at the 1% level on 10,000 thinned draws, and the frozen
// step size holds the tuned acceptance rate.
Outcome analytic_normal_exactness() {
  const StdNormalDensity target(2);
  const HmcConfig cfg;
  RecordingConfig rec;
  rec.steps = 15000;
  rec.burn_in = 2500;
  rec.record_every = 5;
  std::vector<ChainState> chains = init_chains(4, 2, 77, cfg.step_size0);
  const ChainEnsemble e = run_chains_hmc(chains, target, cfg, rec);

  const std::size_t n = e.chains * e.kept_steps();
  // Asymptotic two-sided critical value at significance 0.01.
  const double crit = std::sqrt(-0.5 * std::log(0.005)) /
                      std::sqrt(static_cast<double>(n));
  const double d0 = test_util::ks_statistic(kept_coordinate(e, 0),
                                            test_util::std_normal_cdf);
  const double d1 = test_util::ks_statistic(kept_coordinate(e, 1),
                                            test_util::std_normal_cdf);
  const double acc = mean_acceptance(e);
  const bool ok =
      d0 < crit && d1 < crit && std::abs(acc - 0.651) <= 0.05;
  return {ok, fmt("ks %.4f/%.4f (crit %.4f, n=%zu), acceptance %.3f "
                  "(0.651 +/- 0.05)",
                  d0, d1, crit, n, acc)};
}

// 5: with an identity flow the linear tilt (1, -1) makes the model
// N((1,-1), I); sampling finds that mean, and transport training on matching
// data recovers the tilt weight.
Outcome linear_tilt_recovery() {
  FlowConfig fc;
  fc.dim = 2;
  fc.depth = 2;
  fc.hidden_width = 4;
  FlowModel flow(fc);  // zero-initialized even stack: exact identity
  flow.mark_actnorm_ready();

  EnergyConfig ec;
  ec.dim = 2;
  ec.hidden_layers = 0;
  EnergyModel tilt(ec);
  {
    auto params = tilt.params();
    (*params[0].value)[0] = 1.0;
    (*params[0].value)[1] = -1.0;
  }
  const TiltedModel model(flow, tilt);
  const LatentTiltedDensity latent(model);
  RecordingConfig rec;
  rec.steps = 3500;
  rec.burn_in = 500;
  std::vector<ChainState> chains = init_chains(16, 2, 501, HmcConfig{}.step_size0);
  const ChainEnsemble e = run_chains_hmc(chains, latent, HmcConfig{}, rec);
  const std::vector<double> c0 = kept_coordinate(e, 0);
  const std::vector<double> c1 = kept_coordinate(e, 1);
  const double m0 = test_util::mean_of(c0);
  const double m1 = test_util::mean_of(c1);

  Rng rng(73);
  Tensor data = std_normal_batch(8000, 2, rng);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    data.at(i, 0) += 1.0;
    data.at(i, 1) += -1.0;
  }
  EnergyModel learned(ec);
  NtTrainConfig cfg;
  cfg.iterations = 1200;
  cfg.learning_rate = 5e-3;
  cfg.batch_size = 64;
  cfg.hmc.steps_per_call = 5;
  nt_ebm_train(flow, learned, data, cfg, 5);
  auto params = learned.params();
  const double w0 = (*params[0].value)[0];
  const double w1 = (*params[0].value)[1];

  const bool ok = std::abs(m0 - 1.0) <= 0.05 && std::abs(m1 + 1.0) <= 0.05 &&
                  std::abs(w0 - 1.0) <= 0.05 && std::abs(w1 + 1.0) <= 0.05;
  return {ok, fmt("sample mean (%.3f, %.3f), learned tilt (%.3f, %.3f), "
                  "target (1, -1) +/- 0.05",
                  m0, m1, w0, w1)};
}

// 6: contrastive training against the flow's own samples recovers the
// analytic log-density ratio of a shifted Gaussian pair along [-2, 3].
Outcome contrastive_ratio_recovery() {
  FlowConfig fc;
  fc.dim = 1;
  fc.depth = 2;
  fc.hidden_width = 4;
  FlowModel noise(fc);  // exact standard normal
  noise.mark_actnorm_ready();

  Rng data_rng(91);
  Tensor data = std_normal_batch(20000, 1, data_rng);
  for (std::size_t i = 0; i < data.rows(); ++i) data[i] += 1.0;

  EnergyConfig ec;
  ec.dim = 1;
  ec.hidden_layers = 2;
  ec.hidden_width = 16;
  EnergyModel energy(ec);
  Rng init_rng(83);
  energy.init_weights(init_rng);

  NceTrainConfig cfg;
  cfg.iterations = 20000;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 512;
  cfg.weight_decay = 1e-4;
  const NceTrainResult res = nce_train(noise, energy, data, cfg, 11);

  // log N(1,1) - log N(0,1) = x - 1/2; rho = 1/2 adds no offset.
  const std::size_t n_probe = 41;
  Tensor probe = Tensor::zeros({n_probe, 1});
  for (std::size_t i = 0; i < n_probe; ++i)
    probe[i] = -2.0 + 5.0 * static_cast<double>(i) /
                          static_cast<double>(n_probe - 1);
  const Tensor f = energy.value(probe);
  double worst = 0.0;
  for (std::size_t i = 0; i < n_probe; ++i)
    worst = std::max(worst,
                     std::abs(res.bias + f[i] - (probe[i] - 0.5)));
  const bool ok = worst <= 0.1;
  return {ok, fmt("max |logit - (x - 1/2)| = %.4f on [-2, 3] (bound 0.1)",
                  worst)};
}

// 7: the numeric substrate: tape gradients against finite differences, the
// flow's inverse against its forward, its log-det against a numeric
// Jacobian, and leapfrog's exact reversibility.
Outcome numeric_substrate(const Demo& d) {
  const TiltedModel model(d.flow, d.energy);
  const LatentTiltedDensity latent(model);
  bool ok = true;
  std::string note;

  // Tape gradient of the latent log-density versus central differences.
  const double pts[3][2] = {{0.3, -1.1}, {1.2, 0.4}, {-0.7, -0.2}};
  double grad_err = 0.0;
  for (const auto& p : pts) {
    const Tensor z({1, 2}, {p[0], p[1]});
    Tensor grad;
    latent.logp_grad(z, nullptr, &grad);
    const Tensor fd = test_util::fd_gradient(
        [&](const Tensor& q) {
          return latent.logp(Tensor({1, 2}, {q[0], q[1]})).at(0, 0);
        },
        Tensor({2}, {p[0], p[1]}));
    for (std::size_t j = 0; j < 2; ++j) {
      if (!test_util::close(grad[j], fd[j], 1e-5)) ok = false;
      grad_err = std::max(grad_err, std::abs(grad[j] - fd[j]) /
                                        std::max(1.0, std::abs(fd[j])));
    }
  }

  // Tilt parameter gradients of the training objective versus differences.
  EnergyConfig ec;
  ec.dim = 2;
  ec.hidden_layers = 2;
  ec.hidden_width = 8;
  EnergyModel energy(ec);
  Rng rng(17);
  energy.init_weights(rng);
  const Tensor pos = std_normal_batch(8, 2, rng);
  const Tensor neg = std_normal_batch(8, 2, rng);
  const EbmGrad eg = ebm_grad_estimate(energy, pos, neg);
  auto params = energy.params();
  auto gap_value = [&]() {
    double g = 0.0;
    const Tensor fp = energy.value(pos);
    const Tensor fn = energy.value(neg);
    for (std::size_t i = 0; i < fp.size(); ++i) g += fp[i];
    for (std::size_t i = 0; i < fn.size(); ++i) g -= fn[i];
    return g / static_cast<double>(fp.size());
  };
  const double h = 1e-6;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& value = *params[pi].value;
    for (std::size_t i = 0; i < value.size(); i += 1 + value.size() / 3) {
      const double keep = value[i];
      value[i] = keep + h;
      const double up = gap_value();
      value[i] = keep - h;
      const double down = gap_value();
      value[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      if (!test_util::close(eg.grads[pi][i], fd, 1e-5)) ok = false;
    }
  }

  // Round-trip through the trained flow on real data.
  std::vector<double> head(d.data.data(), d.data.data() + 256 * 2);
  const Tensor x(std::vector<std::size_t>{256, 2}, std::move(head));
  const auto [z, log_det] = d.flow.inverse(x);
  const double rt = test_util::max_abs_diff(d.flow.forward(z), x);
  if (rt > 1e-9) ok = false;

  // Forward log-det versus a numeric Jacobian determinant in 4-D.
  FlowConfig fc;
  fc.dim = 4;
  fc.depth = 4;
  fc.hidden_width = 16;
  FlowModel f4(fc);
  Rng frng(7);
  f4.init_weights(frng);
  double det_err = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const Tensor z0 = std_normal_batch(1, 4, frng);
    const Tensor jac = test_util::numeric_jacobian(
        [&](const Tensor& q) {
          Tensor row = f4.forward(Tensor({1, 4}, {q[0], q[1], q[2], q[3]}));
          return Tensor({4}, {row[0], row[1], row[2], row[3]});
        },
        Tensor({4}, {z0[0], z0[1], z0[2], z0[3]}));
    Tape tape;
    const auto vars = f4.bind(tape, false);
    const VarWithLogDet fwd = f4.forward_logdet_t(tape, vars, tape.leaf(z0));
    const double analytic = fwd.log_det.value().at(0, 0);
    const double numeric = std::log(std::abs(test_util::determinant(jac)));
    if (!test_util::close(analytic, numeric, 1e-5)) ok = false;
    det_err = std::max(det_err, std::abs(analytic - numeric));
  }

  // Leapfrog retraces itself under momentum reversal.
  Rng lrng(19);
  Tensor Z = std_normal_batch(4, 2, lrng);
  Tensor P = std_normal_batch(4, 2, lrng);
  const Tensor Z0 = Z, P0 = P;
  const std::vector<double> eps(4, 0.01);
  leapfrog(latent, Z, P, eps, 25);
  for (std::size_t i = 0; i < P.size(); ++i) P[i] = -P[i];
  leapfrog(latent, Z, P, eps, 25);
  for (std::size_t i = 0; i < P.size(); ++i) P[i] = -P[i];
  const double rev = std::max(test_util::max_abs_diff(Z, Z0),
                              test_util::max_abs_diff(P, P0));
  if (rev > 1e-10) ok = false;

  return {ok, fmt("grad rel %.2e, round-trip %.2e, log-det diff %.2e, "
                  "reversal %.2e",
                  grad_err, rt, det_err, rev)};
}

// 8: the diagnostics match a hand-worked two-chain example exactly and track
// the AR(1) autocorrelation closed form.
Outcome diagnostic_oracles() {
  ChainEnsemble hand = ChainEnsemble::empty(2, 3, 1);
  const double rows[2][3] = {{0.0, 1.0, 2.0}, {2.0, 3.0, 4.0}};
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 3; ++t) hand.at(c, t, 0) = rows[c][t];
  const GrReport gr = gelman_rubin(hand);
  // Means 1 and 3, unit within-variance, between = n * sum (mean - grand)^2
  // / (m - 1) = 6, pooled = (2/3) * 1 + 6/3.
  const double pooled = (3.0 - 1.0) / 3.0 * 1.0 + 6.0 / 3.0;
  bool ok = gr.within_var[0] == 1.0 && gr.between_var[0] == 6.0 &&
            gr.pooled_var[0] == pooled && gr.r_hat[0] == std::sqrt(pooled);

  const double phi = 0.9;
  const std::size_t n = 50000, m = 4;
  ChainEnsemble ar = ChainEnsemble::empty(m, n, 1);
  Rng rng(11);
  for (std::size_t c = 0; c < m; ++c) {
    const std::vector<double> s = test_util::ar1_series(phi, n, rng);
    for (std::size_t t = 0; t < n; ++t) ar.at(c, t, 0) = s[t];
  }
  const AutocorrReport rep = autocorrelation(ar, 20);
  const double tol = 3.0 / std::sqrt(static_cast<double>(n));
  double worst = 0.0;
  ok = ok && rep.mean[0] == 1.0;
  for (std::size_t lag = 1; lag <= 20; ++lag) {
    const double err =
        std::abs(rep.mean[lag] - std::pow(phi, static_cast<double>(lag)));
    worst = std::max(worst, err);
    if (err >= tol) ok = false;
  }
  return {ok, fmt("hand example exact, ar(1) worst err %.4f (tol %.4f)",
                  worst, tol)};
}

// 9: a magnetized path between latent preimages of two opposite ring modes
// lands inside the anchor mode and stays inside the calibrated energy band.
Outcome guided_inter_mode_path(const Demo& d) {
  const GaussianMixture target = make_target(d.s.target);
  const auto& comps = target.components();
  const Tensor c_from({1, 2}, {comps[0].mean[0], comps[0].mean[1]});
  const Tensor c_to({1, 2}, {comps[4].mean[0], comps[4].mean[1]});
  const auto [z_from, ld1] = d.flow.inverse(c_from);
  const auto [z_to, ld2] = d.flow.inverse(c_to);

  const TiltedModel model(d.flow, d.energy);
  MagnetizedConfig cfg;
  cfg.gamma = 6.0;
  cfg.steps = 1000;
  cfg.dt = 0.01;
  Rng rng(chain_seed(d.s.seed, kInterpStream));
  const PathResult path = magnetized_path(
      Tensor({2}, {z_from[0], z_from[1]}), Tensor({2}, {z_to[0], z_to[1]}),
      model, cfg, rng);

  const std::size_t last = path.x.rows() - 1;
  const double dx = path.x.at(last, 0) - c_to[0];
  const double dy = path.x.at(last, 1) - c_to[1];
  const double dist = std::sqrt(dx * dx + dy * dy);
  double lo = path.energy[0], hi = path.energy[0];
  for (std::size_t t = 0; t <= cfg.steps; ++t) {
    lo = std::min(lo, path.energy[t]);
    hi = std::max(hi, path.energy[t]);
  }
  const double band = hi - lo;
  const double radius = 3.0 * comps[4].sigma;
  const bool ok = dist <= radius && band <= kPathEnergyBandCeiling;
  return {ok, fmt("landing %.3f from anchor mode (bound %.1f), energy band "
                  "%.2f (bound %.1f)",
                  dist, radius, band, kPathEnergyBandCeiling)};
}

// 10: serialization is lossless: 100 random checkpoints and 100 random chain
// dumps round-trip bit for bit, and the IDX reader matches a byte-walk of
// crafted files.
Outcome lossless_serialization() {
  const fs::path dir = fs::temp_directory_path() / "febm_acceptance_io";
  fs::create_directories(dir);
  const std::string ck_path = (dir / "roundtrip.ckpt").string();
  const std::string chain_path = (dir / "roundtrip.csv").string();
  bool ok = true;

  Rng rng(29);
  for (int trial = 0; trial < 100 && ok; ++trial) {
    Checkpoint ck;
    const std::size_t n_rec = 1 + rng.uniform_index(4);
    for (std::size_t r = 0; r < n_rec; ++r) {
      const std::size_t rank = 1 + rng.uniform_index(3);
      std::vector<std::size_t> shape;
      std::size_t total = 1;
      for (std::size_t k = 0; k < rank; ++k) {
        shape.push_back(1 + rng.uniform_index(4));
        total *= shape.back();
      }
      std::vector<double> vals(total);
      for (double& v : vals) v = rng.normal();
      if (total > 0) vals[0] = -0.0;               // signed zero survives
      if (total > 1) vals[1] = 1e-310;             // subnormal survives
      ck.add("rec." + std::to_string(r), Tensor(shape, std::move(vals)));
    }
    save_checkpoint(ck_path, ck);
    const Checkpoint back = load_checkpoint(ck_path);
    if (back.records.size() != ck.records.size()) ok = false;
    for (std::size_t r = 0; ok && r < ck.records.size(); ++r) {
      const Tensor& a = ck.records[r].second;
      const Tensor& b = back.records[r].second;
      if (ck.records[r].first != back.records[r].first ||
          a.shape() != b.shape())
        ok = false;
      for (std::size_t i = 0; ok && i < a.size(); ++i)
        if (!bits_equal(a[i], b[i])) ok = false;
    }
  }

  for (int trial = 0; trial < 100 && ok; ++trial) {
    const std::size_t chains = 1 + rng.uniform_index(4);
    const std::size_t steps = 2 + rng.uniform_index(5);
    const std::size_t dim = 1 + rng.uniform_index(3);
    ChainEnsemble e = ChainEnsemble::empty(chains, steps, dim);
    e.burn_in = rng.uniform_index(steps);
    e.stride = 1 + rng.uniform_index(5);
    for (double& v : e.z) v = rng.normal();
    for (double& v : e.energy) v = rng.normal();
    for (double& v : e.step_size) v = rng.uniform_pos();
    for (auto& a : e.accepted) a = rng.uniform() < 0.5 ? 0 : 1;
    dump_chains(chain_path, e);
    const ChainEnsemble back = load_chains(chain_path);
    if (back.chains != e.chains || back.steps != e.steps ||
        back.dim != e.dim || back.burn_in != e.burn_in ||
        back.stride != e.stride || back.accepted != e.accepted)
      ok = false;
    for (std::size_t i = 0; ok && i < e.z.size(); ++i)
      if (!bits_equal(e.z[i], back.z[i])) ok = false;
    for (std::size_t i = 0; ok && i < e.energy.size(); ++i)
      if (!bits_equal(e.energy[i], back.energy[i]) ||
          !bits_equal(e.step_size[i], back.step_size[i]))
        ok = false;
  }

  // Crafted IDX files checked value by value against the byte layout.
  const std::string img_path = (dir / "img.idx").string();
  const std::string lab_path = (dir / "lab.idx").string();
  {
    // Magic 0x00000803, 2 images of 2 x 3 pixels valued 0..11.
    std::ofstream out(img_path, std::ios::binary | std::ios::trunc);
    const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 2,
                                    0, 0, 0, 2, 0, 0, 0, 3};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    for (int p = 0; p < 12; ++p) out.put(static_cast<char>(p));
  }
  {
    // Magic 0x00000801, labels {7, 0, 255}.
    const unsigned char bytes[] = {0, 0, 8, 1, 0, 0, 0, 3, 7, 0, 255};
    std::ofstream out(lab_path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes), sizeof bytes);
  }
  std::size_t rows = 0, cols = 0;
  const Tensor img = load_idx_images(img_path, &rows, &cols);
  if (rows != 2 || cols != 3 || img.rows() != 2 || img.cols() != 6) ok = false;
  for (std::size_t i = 0; ok && i < 12; ++i) {
    const double expected = static_cast<double>(i) / 255.0 * 2.0 - 1.0;
    if (std::abs(img[i] - expected) > 1e-15) ok = false;
  }
  const std::vector<std::uint8_t> labels = load_idx_labels(lab_path);
  if (labels != std::vector<std::uint8_t>{7, 0, 255}) ok = false;

  std::error_code ec;
  fs::remove_all(dir, ec);
  return {ok, "100 checkpoint + 100 chain round-trips bit-exact, idx matches "
              "byte walk"};
}

}  // namespace

int main() {
  int failures = 0;
  int index = 0;
  auto report = [&](const char* name, const Outcome& r) {
    ++index;
    std::printf("%s %2d %-34s %s\n", r.pass ? "PASS" : "FAIL", index, name,
                r.detail.c_str());
    std::fflush(stdout);
    if (!r.pass) ++failures;
  };

  const Demo demo = build_demo();
  report("ring-demo latent-transport mixing", ring_demo_mixing(demo));
  report("data-space sampler mixes slower", data_space_mixes_slower(demo));
  report("tilt tightens the backbone fit", tilt_tightens_fit(demo));
  report("analytic-normal sampler exactness", analytic_normal_exactness());
  report("linear-tilt oracle recovery", linear_tilt_recovery());
  report("contrastive ratio recovery", contrastive_ratio_recovery());
  report("gradients, inverses, integrator", numeric_substrate(demo));
  report("diagnostic oracles", diagnostic_oracles());
  report("guided inter-mode path", guided_inter_mode_path(demo));
  report("lossless serialization", lossless_serialization());

  if (failures == 0)
    std::printf("all 10 criteria passed\n");
  else
    std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
