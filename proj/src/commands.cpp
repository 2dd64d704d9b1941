#include "febm/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "febm/diagnostics.hpp"
#include "febm/errors.hpp"
#include "febm/io.hpp"

namespace febm {

namespace {

// Fixed stream tags so every consumer of the run seed draws independently.
constexpr std::uint64_t kDataStream = 0x6461746167656eULL;
constexpr std::uint64_t kFlowInitStream = 0x666c6f77696e69ULL;
constexpr std::uint64_t kMleStream = 0x6d6c656261746bULL;
constexpr std::uint64_t kEnergyInitStream = 0x656e6572696e69ULL;
constexpr std::uint64_t kInterpStream = 0x696e74657270ULL;

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir);
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out.good()) throw IoError("cannot write " + path);
}

void write_echo(const RunSettings& s, const CommandPaths& paths) {
  ensure_out_dir(paths.out_dir);
  write_text(join(paths.out_dir, "config.cfg"), s.echo);
}

Tensor make_dataset(const RunSettings& s, const GaussianMixture& target) {
  Rng rng(chain_seed(s.seed, kDataStream));
  return target.sample(s.data_samples, rng);
}

// Trace columns to a CSV tensor; all vectors must share a length.
void write_trace(const std::string& path,
                 const std::vector<std::string>& header,
                 const std::vector<const std::vector<double>*>& cols) {
  const std::size_t n = cols.front()->size();
  Tensor data = Tensor::zeros({n, 1 + cols.size()});
  for (std::size_t i = 0; i < n; ++i) {
    data.at(i, 0) = static_cast<double>(i);
    for (std::size_t j = 0; j < cols.size(); ++j)
      data.at(i, j + 1) = (*cols[j])[i];
  }
  std::vector<std::string> full_header = {"iteration"};
  full_header.insert(full_header.end(), header.begin(), header.end());
  write_csv(path, full_header, data);
}

FlowModel train_backbone(const RunSettings& s, const Tensor& data,
                         const std::string& out_dir) {
  FlowModel flow(s.flow);
  Rng init_rng(chain_seed(s.seed, kFlowInitStream));
  flow.init_weights(init_rng);
  Rng mle_rng(chain_seed(s.seed, kMleStream));
  const FlowTrainResult res = train_flow_mle(flow, data, s.flow_train, mle_rng);
  write_trace(join(out_dir, "flow_nll.csv"), {"nll"}, {&res.nll_trace});
  std::printf("flow: %zu iterations, final nll %.4f\n", res.nll_trace.size(),
              res.nll_trace.empty() ? 0.0 : res.nll_trace.back());
  return flow;
}

// Loads the backbone from `checkpoint` when given, otherwise trains one from
// scratch and saves it alongside the other artifacts.
FlowModel obtain_backbone(const RunSettings& s, const CommandPaths& paths,
                          const Tensor& data) {
  if (!paths.checkpoint.empty()) {
    FlowModel flow = restore_flow(load_checkpoint(paths.checkpoint));
    std::printf("flow: restored from %s\n", paths.checkpoint.c_str());
    return flow;
  }
  FlowModel flow = train_backbone(s, data, paths.out_dir);
  Checkpoint ckpt = checkpoint_flow(flow);
  save_checkpoint(join(paths.out_dir, "flow.ckpt"), ckpt);
  return flow;
}

EnergyModel make_energy(const RunSettings& s) {
  EnergyModel energy(s.energy);
  Rng rng(chain_seed(s.seed, kEnergyInitStream));
  energy.init_weights(rng);
  return energy;
}

// Comma-separated coordinate list ("0.4,-1.2") to a [dim] tensor.
Tensor parse_point(const std::string& text, std::size_t dim,
                   const char* flag) {
  std::vector<double> vals;
  const char* p = text.c_str();
  while (true) {
    char* end = nullptr;
    const double v = std::strtod(p, &end);
    if (end == p)
      throw ConfigError(std::string(flag) + ": malformed coordinate list '" +
                        text + "'");
    vals.push_back(v);
    p = end;
    if (*p == '\0') break;
    if (*p != ',')
      throw ConfigError(std::string(flag) + ": expected comma in '" + text +
                        "'");
    ++p;
  }
  if (vals.size() != dim)
    throw ConfigError(std::string(flag) + ": expected " + std::to_string(dim) +
                      " coordinates, got " + std::to_string(vals.size()));
  return Tensor({dim}, std::move(vals));
}

// Tilt that is identically zero, for sampling plain flow checkpoints.
EnergyModel null_energy(std::size_t dim) {
  EnergyConfig cfg;
  cfg.dim = dim;
  cfg.hidden_layers = 0;
  cfg.hidden_width = 1;
  return EnergyModel(cfg);  // zero-initialized linear map
}

// Recorded positions as one [chains * steps, dim] matrix (ensemble layout is
// already row-major in that order).
Tensor all_positions(const ChainEnsemble& e) {
  return Tensor({e.chains * e.steps, e.dim}, e.z);
}

// Kept (post warm-up) positions, chain-major.
Tensor kept_positions(const ChainEnsemble& e) {
  Tensor out = Tensor::zeros({e.chains * e.kept_steps(), e.dim});
  std::size_t r = 0;
  for (std::size_t c = 0; c < e.chains; ++c)
    for (std::size_t t = e.burn_in; t < e.steps; ++t, ++r)
      for (std::size_t j = 0; j < e.dim; ++j) out.at(r, j) = e.at(c, t, j);
  return out;
}

ChainEnsemble map_through_flow(const ChainEnsemble& e, const FlowModel& flow) {
  ChainEnsemble out = e;
  const Tensor x = flow.forward(all_positions(e));
  out.z.assign(x.data(), x.data() + x.size());
  return out;
}

void write_samples_csv(const std::string& path, const Tensor& x) {
  std::vector<std::string> header;
  for (std::size_t j = 0; j < x.cols(); ++j)
    header.push_back("x" + std::to_string(j));
  write_csv(path, header, x);
}

struct SampleRun {
  ChainEnsemble chains;   // sampler state space
  Tensor data_samples;    // kept positions mapped to data space
};

SampleRun run_sampler(const RunSettings& s, const TiltedModel& model) {
  std::vector<ChainState> chains = init_chains(
      s.sample_chains, model.dim(), s.seed, s.hmc.step_size0);
  SampleRun run;
  if (s.sampler == "latent-hmc") {
    LatentTiltedDensity target(model);
    run.chains = run_chains_hmc(chains, target, s.hmc, s.recording);
    run.data_samples = model.flow().forward(kept_positions(run.chains));
  } else if (s.sampler == "data-hmc") {
    DataTiltedDensity target(model);
    run.chains = run_chains_hmc(chains, target, s.hmc, s.recording);
    run.data_samples = kept_positions(run.chains);
  } else if (s.sampler == "data-langevin") {
    DataTiltedDensity target(model);
    run.chains =
        run_chains_langevin(chains, target, s.langevin_step, s.recording);
    run.data_samples = kept_positions(run.chains);
  } else {
    throw ConfigError("unknown sampler " + s.sampler);
  }
  return run;
}

void print_gr(const GrReport& gr) {
  std::printf("r-hat: mean %.4f, max %.4f%s\n", gr.mean_r_hat, gr.max_r_hat,
              gr.degenerate ? " (degenerate coordinate)" : "");
}

void write_gr_csv(const std::string& path, const GrReport& gr) {
  Tensor data = Tensor::zeros({gr.r_hat.size(), 5});
  for (std::size_t j = 0; j < gr.r_hat.size(); ++j) {
    data.at(j, 0) = static_cast<double>(j);
    data.at(j, 1) = gr.r_hat[j];
    data.at(j, 2) = gr.within_var[j];
    data.at(j, 3) = gr.between_var[j];
    data.at(j, 4) = gr.pooled_var[j];
  }
  write_csv(path, {"coordinate", "r_hat", "within_var", "between_var",
                   "pooled_var"},
            data);
}

void write_autocorr_csv(const std::string& path, const AutocorrReport& ac) {
  Tensor data = Tensor::zeros({ac.mean.size(), 5});
  for (std::size_t l = 0; l < ac.mean.size(); ++l) {
    data.at(l, 0) = static_cast<double>(l);
    data.at(l, 1) = ac.mean[l];
    data.at(l, 2) = ac.mean_abs[l];
    data.at(l, 3) = ac.min[l];
    data.at(l, 4) = ac.max[l];
  }
  write_csv(path, {"lag", "mean", "mean_abs", "min", "max"}, data);
}

Tensor target_centers(const GaussianMixture& mix) {
  const auto& comps = mix.components();
  Tensor centers = Tensor::zeros({comps.size(), mix.dim()});
  for (std::size_t k = 0; k < comps.size(); ++k)
    for (std::size_t j = 0; j < mix.dim(); ++j)
      centers.at(k, j) = comps[k].mean[j];
  return centers;
}

// Shared by diagnose and demo2d: R-hat, autocorrelation, acceptance, and
// (when the dimensions line up) mode coverage of the supplied samples.
void run_diagnostics(const RunSettings& s, const CommandPaths& paths,
                     const ChainEnsemble& e, const Tensor& samples) {
  if (e.chains >= 2) {
    const GrReport gr = gelman_rubin(e);
    print_gr(gr);
    write_gr_csv(join(paths.out_dir, "gr.csv"), gr);
  } else {
    std::printf("r-hat: skipped, needs at least 2 chains\n");
  }
  const std::size_t max_lag =
      std::min(s.diag_max_lag, e.kept_steps() > 1 ? e.kept_steps() - 1 : 0);
  if (max_lag > 0) {
    const AutocorrReport ac = autocorrelation(e, max_lag);
    std::printf("autocorr: mean |lag %zu| %.4f (%zu series excluded)\n",
                max_lag, ac.mean_abs[max_lag], ac.excluded_series);
    write_autocorr_csv(join(paths.out_dir, "autocorr.csv"), ac);
  }
  std::printf("acceptance: %.4f\n", mean_acceptance(e));

  const GaussianMixture mix = make_target(s.target);
  if (mix.dim() == samples.cols()) {
    const Tensor centers = target_centers(mix);
    const ModeCoverage cov = mode_coverage(samples, centers, s.mode_radius);
    std::printf("modes visited: %zu/%zu, entropy %.4f, unassigned %zu\n",
                cov.visited, cov.counts.size(), cov.entropy, cov.unassigned);
    Tensor cdata = Tensor::zeros({cov.counts.size(), 2});
    for (std::size_t k = 0; k < cov.counts.size(); ++k) {
      cdata.at(k, 0) = static_cast<double>(k);
      cdata.at(k, 1) = static_cast<double>(cov.counts[k]);
    }
    write_csv(join(paths.out_dir, "coverage.csv"), {"center", "count"}, cdata);
  }
}

}  // namespace

void cmd_train_flow(const RunSettings& s, const CommandPaths& paths) {
  write_echo(s, paths);
  const GaussianMixture target = make_target(s.target);
  const Tensor data = make_dataset(s, target);
  FlowModel flow = train_backbone(s, data, paths.out_dir);
  Checkpoint ckpt = checkpoint_flow(flow);
  save_checkpoint(join(paths.out_dir, "flow.ckpt"), ckpt);
  std::printf("saved %s\n", join(paths.out_dir, "flow.ckpt").c_str());
}

void cmd_train_ebm(const RunSettings& s, const CommandPaths& paths) {
  write_echo(s, paths);
  const GaussianMixture target = make_target(s.target);
  const Tensor data = make_dataset(s, target);
  FlowModel flow = obtain_backbone(s, paths, data);
  EnergyModel energy = make_energy(s);
  const NtTrainResult res = nt_ebm_train(flow, energy, data, s.ebm_train,
                                         s.seed);
  write_trace(join(paths.out_dir, "nt_trace.csv"),
              {"energy_gap", "accept_rate", "mean_step_size"},
              {&res.energy_gap, &res.accept_rate, &res.mean_step_size});
  std::printf("nt: %zu iterations, final gap %.4f, final acceptance %.3f\n",
              res.energy_gap.size(),
              res.energy_gap.empty() ? 0.0 : res.energy_gap.back(),
              res.accept_rate.empty() ? 0.0 : res.accept_rate.back());
  Checkpoint ckpt = checkpoint_tilted(flow, energy);
  save_checkpoint(join(paths.out_dir, "model.ckpt"), ckpt);
  std::printf("saved %s\n", join(paths.out_dir, "model.ckpt").c_str());
}

void cmd_train_nce(const RunSettings& s, const CommandPaths& paths) {
  write_echo(s, paths);
  const GaussianMixture target = make_target(s.target);
  const Tensor data = make_dataset(s, target);
  FlowModel flow = obtain_backbone(s, paths, data);
  EnergyModel energy = make_energy(s);
  const NceTrainResult res = nce_train(flow, energy, data, s.nce_train,
                                       s.seed);
  write_trace(join(paths.out_dir, "nce_loss.csv"), {"loss"},
              {&res.loss_trace});
  std::printf("nce: %zu iterations, final loss %.4f, bias %.4f\n",
              res.loss_trace.size(),
              res.loss_trace.empty() ? 0.0 : res.loss_trace.back(), res.bias);
  Checkpoint ckpt = checkpoint_tilted(flow, energy);
  ckpt.add("nce.bias", Tensor::scalar(res.bias));
  save_checkpoint(join(paths.out_dir, "model_nce.ckpt"), ckpt);
  std::printf("saved %s\n", join(paths.out_dir, "model_nce.ckpt").c_str());
}

void cmd_sample(const RunSettings& s, const CommandPaths& paths) {
  if (paths.checkpoint.empty())
    throw ConfigError("sample: --checkpoint is required");
  write_echo(s, paths);
  const Checkpoint ckpt = load_checkpoint(paths.checkpoint);
  FlowModel flow;
  EnergyModel energy;
  if (has_energy(ckpt)) {
    restore_tilted(ckpt, flow, energy);
  } else {
    flow = restore_flow(ckpt);
    energy = null_energy(flow.dim());
  }
  const TiltedModel model(flow, energy);
  const SampleRun run = run_sampler(s, model);
  dump_chains(join(paths.out_dir, "chains.csv"), run.chains);
  write_samples_csv(join(paths.out_dir, "samples.csv"), run.data_samples);
  std::printf("sampler %s: %zu chains x %zu recorded steps, acceptance %.4f\n",
              s.sampler.c_str(), run.chains.chains, run.chains.steps,
              mean_acceptance(run.chains));
  std::printf("saved %s and samples.csv\n",
              join(paths.out_dir, "chains.csv").c_str());
}

void cmd_diagnose(const RunSettings& s, const CommandPaths& paths) {
  if (paths.chains.empty())
    throw ConfigError("diagnose: --chains is required");
  write_echo(s, paths);
  const ChainEnsemble e = load_chains(paths.chains);
  std::printf("loaded %zu chains x %zu steps (dim %zu, burn-in %zu)\n",
              e.chains, e.steps, e.dim, e.burn_in);
  run_diagnostics(s, paths, e, kept_positions(e));
}

void cmd_interpolate(const RunSettings& s, const CommandPaths& paths) {
  if (paths.checkpoint.empty())
    throw ConfigError("interpolate: --checkpoint is required");
  write_echo(s, paths);
  const Checkpoint ckpt = load_checkpoint(paths.checkpoint);
  FlowModel flow;
  EnergyModel energy;
  if (has_energy(ckpt)) {
    restore_tilted(ckpt, flow, energy);
  } else {
    flow = restore_flow(ckpt);
    energy = null_energy(flow.dim());
  }
  const TiltedModel model(flow, energy);
  Rng rng(chain_seed(s.seed, kInterpStream));
  auto endpoint = [&](const std::string& text, const char* flag) {
    if (text.empty()) {
      const Tensor draw = std_normal_batch(1, flow.dim(), rng);
      return Tensor({flow.dim()},
                    {draw.data(), draw.data() + flow.dim()});
    }
    return parse_point(text, flow.dim(), flag);
  };
  const Tensor z1 = endpoint(paths.z1, "--z1");
  const Tensor z2 = endpoint(paths.z2, "--z2");
  const PathResult path = magnetized_path(z1, z2, model, s.interp, rng);

  const std::size_t rows = path.z.rows();
  const std::size_t d = flow.dim();
  Tensor data = Tensor::zeros({rows, 3 + 2 * d});
  std::vector<std::string> header = {"step", "energy", "dist"};
  for (std::size_t j = 0; j < d; ++j) header.push_back("z" + std::to_string(j));
  for (std::size_t j = 0; j < d; ++j) header.push_back("x" + std::to_string(j));
  for (std::size_t t = 0; t < rows; ++t) {
    data.at(t, 0) = static_cast<double>(t);
    data.at(t, 1) = path.energy[t];
    data.at(t, 2) = path.dist_to_anchor[t];
    for (std::size_t j = 0; j < d; ++j) {
      data.at(t, 3 + j) = path.z.at(t, j);
      data.at(t, 3 + d + j) = path.x.at(t, j);
    }
  }
  write_csv(join(paths.out_dir, "path.csv"), header, data);
  std::printf("path: %zu steps, final distance to anchor %.4f\n", rows - 1,
              path.dist_to_anchor[rows - 1]);
}

void cmd_demo2d(const RunSettings& s, const CommandPaths& paths) {
  write_echo(s, paths);
  const GaussianMixture target = make_target(s.target);
  const Tensor data = make_dataset(s, target);
  std::printf("demo2d: target %s, %zu training points\n",
              s.target.kind.c_str(), data.rows());

  FlowModel flow = train_backbone(s, data, paths.out_dir);
  EnergyModel energy = make_energy(s);
  const NtTrainResult nt = nt_ebm_train(flow, energy, data, s.ebm_train,
                                        s.seed);
  write_trace(join(paths.out_dir, "nt_trace.csv"),
              {"energy_gap", "accept_rate", "mean_step_size"},
              {&nt.energy_gap, &nt.accept_rate, &nt.mean_step_size});
  std::printf("nt: %zu iterations, final gap %.4f\n", nt.energy_gap.size(),
              nt.energy_gap.empty() ? 0.0 : nt.energy_gap.back());
  Checkpoint ckpt = checkpoint_tilted(flow, energy);
  save_checkpoint(join(paths.out_dir, "model.ckpt"), ckpt);

  const TiltedModel model(flow, energy);
  const SampleRun run = run_sampler(s, model);
  dump_chains(join(paths.out_dir, "chains.csv"), run.chains);
  write_samples_csv(join(paths.out_dir, "samples.csv"), run.data_samples);
  std::printf("sampler %s: acceptance %.4f\n", s.sampler.c_str(),
              mean_acceptance(run.chains));

  // Convergence statistics are taken in data space regardless of where the
  // sampler ran.
  const ChainEnsemble diag_e = s.sampler == "latent-hmc"
                                   ? map_through_flow(run.chains, flow)
                                   : run.chains;
  run_diagnostics(s, paths, diag_e, run.data_samples);
}

}  // namespace febm
