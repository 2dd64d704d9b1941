#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>

#include "febm/energy.hpp"
#include "febm/flow.hpp"
#include "febm/samplers.hpp"
#include "febm/targets.hpp"
#include "febm/trainers.hpp"

namespace febm {

// Flat key-value run configuration. Files hold one dotted key per line
// ("sample.steps = 2000"), '#' starts a comment, blank lines are ignored.
// Typed getters record the value they returned so the effective
// configuration can be echoed verbatim and unknown keys rejected.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  // Overrides (CLI flags) replace any file value before consumption.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  double get_double(const std::string& key, double def);
  std::size_t get_size(const std::string& key, std::size_t def);
  bool get_bool(const std::string& key, bool def);
  std::string get_string(const std::string& key, const std::string& def);

  // Throws ConfigError naming every key no getter consumed.
  void reject_unknown() const;

  // Sorted effective key=value lines; feeding them back reproduces the run
  // bit for bit.
  std::string echo() const;

 private:
  std::map<std::string, std::string> raw_;
  std::set<std::string> consumed_;
  std::map<std::string, std::string> effective_;
};

// Every tunable of the pipeline with defaults resolved; commands consume
// this instead of touching Config directly.
struct RunSettings {
  std::size_t seed = 0;
  TargetConfig target;
  std::string flow_preset = "small";  // small | medium | large | custom
  FlowConfig flow;
  EnergyConfig energy;
  std::size_t data_samples = 50000;
  FlowTrainConfig flow_train;
  NtTrainConfig ebm_train;
  NceTrainConfig nce_train;
  std::string sampler = "latent-hmc";  // latent-hmc | data-hmc | data-langevin
  std::size_t sample_chains = 64;
  RecordingConfig recording;
  HmcConfig hmc;
  double langevin_step = 0.02;
  std::size_t diag_max_lag = 200;
  double mode_radius = 0.9;
  MagnetizedConfig interp;
  std::string echo;
};

// Consumes the full schema (so any leftover key is unknown), validates, and
// snapshots the effective echo.
RunSettings resolve_settings(Config& cfg);

}  // namespace febm
