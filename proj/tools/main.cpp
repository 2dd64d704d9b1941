// Command-line front end: parses flags, loads the config, applies overrides,
// and dispatches to the command layer. Exit codes: 0 success, 1 usage or
// configuration problem, 2 numerical failure.
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "febm/commands.hpp"
#include "febm/errors.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::string checkpoint;
  std::string chains;
  std::string sampler;
  std::string size;
  std::string z1, z2;
  long long seed = -1;  // negative = keep the config value
};

// Common flags shared by every subcommand.
void add_common(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file");
  cmd->add_option("--seed", args.seed, "override run.seed")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", args.out_dir, "output directory (default: out)");
}

void add_sampler_flags(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--sampler", args.sampler,
                  "latent-hmc | data-hmc | data-langevin")
      ->check(CLI::IsMember({"latent-hmc", "data-hmc", "data-langevin"}));
}

void add_size_flag(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--size", args.size, "flow preset: small | medium | large")
      ->check(CLI::IsMember({"small", "medium", "large"}));
}

febm::RunSettings load_settings(const CliArgs& args) {
  febm::Config cfg = args.config_path.empty()
                         ? febm::Config()
                         : febm::Config::from_file(args.config_path);
  if (args.seed >= 0) cfg.set("run.seed", std::to_string(args.seed));
  if (!args.sampler.empty()) cfg.set("sample.sampler", args.sampler);
  if (!args.size.empty()) cfg.set("flow.preset", args.size);
  return febm::resolve_settings(cfg);
}

febm::CommandPaths make_paths(const CliArgs& args) {
  febm::CommandPaths paths;
  paths.out_dir = args.out_dir;
  paths.checkpoint = args.checkpoint;
  paths.chains = args.chains;
  paths.z1 = args.z1;
  paths.z2 = args.z2;
  return paths;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "febm: energy-based models as learned tilts of a normalizing-flow "
      "backbone, sampled by latent-space MCMC"};
  app.require_subcommand(1);
  CliArgs args;

  using Handler = void (*)(const febm::RunSettings&,
                           const febm::CommandPaths&);
  Handler handler = nullptr;
  auto bind = [&](CLI::App* cmd, Handler h) {
    cmd->callback([&handler, h] { handler = h; });
  };

  CLI::App* train_flow = app.add_subcommand(
      "train-flow", "fit the flow backbone to target samples");
  add_common(train_flow, args);
  add_size_flag(train_flow, args);
  bind(train_flow, febm::cmd_train_flow);

  CLI::App* train_ebm = app.add_subcommand(
      "train-ebm", "fit the tilt by sampled likelihood ascent");
  add_common(train_ebm, args);
  add_size_flag(train_ebm, args);
  train_ebm->add_option("--checkpoint", args.checkpoint,
                        "flow backbone checkpoint (trained fresh if omitted)");
  bind(train_ebm, febm::cmd_train_ebm);

  CLI::App* train_nce = app.add_subcommand(
      "train-nce", "fit the tilt by noise-contrastive estimation");
  add_common(train_nce, args);
  add_size_flag(train_nce, args);
  train_nce->add_option("--checkpoint", args.checkpoint,
                        "flow backbone checkpoint (trained fresh if omitted)");
  bind(train_nce, febm::cmd_train_nce);

  CLI::App* sample =
      app.add_subcommand("sample", "run MCMC chains against a saved model");
  add_common(sample, args);
  add_sampler_flags(sample, args);
  sample->add_option("--checkpoint", args.checkpoint, "model checkpoint")
      ->required();
  bind(sample, febm::cmd_sample);

  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "convergence diagnostics for a saved chain file");
  add_common(diagnose, args);
  diagnose->add_option("--chains", args.chains, "chain CSV to analyze")
      ->required();
  bind(diagnose, febm::cmd_diagnose);

  CLI::App* interpolate = app.add_subcommand(
      "interpolate", "magnetized path between two latent points");
  add_common(interpolate, args);
  interpolate->add_option("--checkpoint", args.checkpoint, "model checkpoint")
      ->required();
  interpolate->add_option("--z1", args.z1,
                          "start point, comma-separated latent coordinates");
  interpolate->add_option("--z2", args.z2,
                          "anchor point, comma-separated latent coordinates");
  bind(interpolate, febm::cmd_interpolate);

  CLI::App* demo = app.add_subcommand(
      "demo2d", "end-to-end 2-D pipeline: data, training, sampling, "
      "diagnostics");
  add_common(demo, args);
  add_sampler_flags(demo, args);
  add_size_flag(demo, args);
  bind(demo, febm::cmd_demo2d);

  CLI11_PARSE(app, argc, argv);

  try {
    const febm::RunSettings settings = load_settings(args);
    handler(settings, make_paths(args));
  } catch (const febm::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const febm::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 1;
  } catch (const febm::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
