#include "febm/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "febm/errors.hpp"

namespace febm {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
                    c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

std::string print_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return from_string(os.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key))
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": invalid key '" + key + "'");
    if (value.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty value for " + key);
    if (!cfg.raw_.emplace(key, value).second)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": duplicate key " + key);
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError("invalid config key '" + key + "'");
  raw_[key] = value;
}

bool Config::has(const std::string& key) const { return raw_.count(key) != 0; }

double Config::get_double(const std::string& key, double def) {
  double v = def;
  auto it = raw_.find(key);
  if (it != raw_.end()) {
    const char* p = it->second.c_str();
    char* end = nullptr;
    v = std::strtod(p, &end);
    if (end == p || *end != '\0')
      throw ConfigError(key + ": expected a real number, got '" + it->second +
                        "'");
    consumed_.insert(key);
  }
  effective_[key] = print_double(v);
  return v;
}

std::size_t Config::get_size(const std::string& key, std::size_t def) {
  std::size_t v = def;
  auto it = raw_.find(key);
  if (it != raw_.end()) {
    const std::string& s = it->second;
    if (s.empty() || s[0] == '-')
      throw ConfigError(key + ": expected a non-negative integer, got '" + s +
                        "'");
    const char* p = s.c_str();
    char* end = nullptr;
    const unsigned long long u = std::strtoull(p, &end, 10);
    if (end == p || *end != '\0')
      throw ConfigError(key + ": expected a non-negative integer, got '" + s +
                        "'");
    v = static_cast<std::size_t>(u);
    consumed_.insert(key);
  }
  effective_[key] = std::to_string(v);
  return v;
}

bool Config::get_bool(const std::string& key, bool def) {
  bool v = def;
  auto it = raw_.find(key);
  if (it != raw_.end()) {
    const std::string& s = it->second;
    if (s == "true" || s == "1" || s == "yes")
      v = true;
    else if (s == "false" || s == "0" || s == "no")
      v = false;
    else
      throw ConfigError(key + ": expected true/false, got '" + s + "'");
    consumed_.insert(key);
  }
  effective_[key] = v ? "true" : "false";
  return v;
}

std::string Config::get_string(const std::string& key,
                               const std::string& def) {
  std::string v = def;
  auto it = raw_.find(key);
  if (it != raw_.end()) {
    v = it->second;
    consumed_.insert(key);
  }
  effective_[key] = v;
  return v;
}

void Config::reject_unknown() const {
  std::string unknown;
  for (const auto& [k, v] : raw_) {
    if (consumed_.count(k)) continue;
    if (!unknown.empty()) unknown += ", ";
    unknown += k;
  }
  if (!unknown.empty())
    throw ConfigError("unknown config key(s): " + unknown);
}

std::string Config::echo() const {
  std::string out =
      "# effective configuration; rerun with --config on this file for an "
      "identical run\n";
  for (const auto& [k, v] : effective_) out += k + " = " + v + "\n";
  return out;
}

RunSettings resolve_settings(Config& cfg) {
  // Nested-settings validators throw DomainError.  Every value they see came
  // from the config here, so surface failures as configuration problems and
  // keep the front end's exit-code contract (1 = bad config).
  auto checked = [](auto&& validate) {
    try {
      validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  };

  RunSettings s;
  s.seed = cfg.get_size("run.seed", 0);

  s.target.kind = cfg.get_string("target.kind", "ring");
  s.target.modes = cfg.get_size("target.modes", 8);
  s.target.radius = cfg.get_double("target.radius", 4.0);
  s.target.sigma = cfg.get_double("target.sigma", 0.3);
  s.target.side = cfg.get_size("target.side", 5);
  s.target.spacing = cfg.get_double("target.spacing", 2.0);
  checked([&] { make_target(s.target); });  // validates kind and parameters

  s.flow_preset = cfg.get_string("flow.preset", "small");
  if (s.flow_preset == "custom") {
    s.flow.depth = cfg.get_size("flow.depth", 4);
    s.flow.hidden_width = cfg.get_size("flow.hidden_width", 128);
  } else {
    if (cfg.has("flow.depth") || cfg.has("flow.hidden_width"))
      throw ConfigError(
          "flow.depth/flow.hidden_width require flow.preset = custom");
    s.flow = flow_preset(s.flow_preset);
  }
  s.flow.dim = 2;  // all built-in targets are planar

  s.energy.dim = s.flow.dim;
  s.energy.hidden_layers = cfg.get_size("energy.hidden_layers", 3);
  s.energy.hidden_width = cfg.get_size("energy.hidden_width", 128);

  s.data_samples = cfg.get_size("data.samples", 50000);
  if (s.data_samples == 0) throw ConfigError("data.samples: must be positive");

  s.flow_train.iterations = cfg.get_size("flow_train.iterations", 3000);
  s.flow_train.batch_size = cfg.get_size("flow_train.batch_size", 256);
  s.flow_train.adam.learning_rate =
      cfg.get_double("flow_train.learning_rate", 1e-3);

  s.hmc.leapfrog_steps = cfg.get_size("hmc.leapfrog_steps", 3);
  s.hmc.steps_per_call = cfg.get_size("hmc.steps_per_call", 20);
  s.hmc.step_size0 = cfg.get_double("hmc.step_size", 0.15);
  s.hmc.target_accept = cfg.get_double("hmc.target_accept", 0.651);
  s.hmc.adapt_gain = cfg.get_double("hmc.adapt_gain", 0.01);
  s.hmc.adapt = cfg.get_bool("hmc.adapt", true);
  checked([&] { s.hmc.validate(); });

  s.ebm_train.iterations = cfg.get_size("ebm_train.iterations", 1200);
  s.ebm_train.learning_rate = cfg.get_double("ebm_train.learning_rate", 1e-3);
  s.ebm_train.batch_size = cfg.get_size("ebm_train.batch_size", 64);
  s.ebm_train.clip_norm = cfg.get_double("ebm_train.clip_norm", 100.0);
  s.ebm_train.weight_decay = cfg.get_double("ebm_train.weight_decay", 0.0);
  s.ebm_train.hmc = s.hmc;
  checked([&] { s.ebm_train.validate(); });

  s.nce_train.iterations = cfg.get_size("nce_train.iterations", 6000);
  s.nce_train.learning_rate = cfg.get_double("nce_train.learning_rate", 1e-3);
  s.nce_train.batch_size = cfg.get_size("nce_train.batch_size", 256);
  s.nce_train.rho = cfg.get_double("nce_train.rho", 0.5);
  s.nce_train.bias_init = cfg.get_double("nce_train.bias_init", 0.0);
  s.nce_train.clip_norm = cfg.get_double("nce_train.clip_norm", 100.0);
  s.nce_train.weight_decay = cfg.get_double("nce_train.weight_decay", 0.0);
  checked([&] { s.nce_train.validate(); });

  s.sampler = cfg.get_string("sample.sampler", "latent-hmc");
  if (s.sampler != "latent-hmc" && s.sampler != "data-hmc" &&
      s.sampler != "data-langevin")
    throw ConfigError(
        "sample.sampler: expected latent-hmc, data-hmc, or data-langevin");
  s.recording.steps = cfg.get_size("sample.steps", 2000);
  s.recording.burn_in = cfg.get_size("sample.burn_in", 400);
  s.recording.record_every = cfg.get_size("sample.record_every", 1);
  checked([&] { s.recording.validate(); });
  const std::size_t chains = cfg.get_size("sample.chains", 64);
  if (chains == 0) throw ConfigError("sample.chains: must be positive");
  s.sample_chains = chains;
  s.langevin_step = cfg.get_double("langevin.step_size", 0.02);
  if (!(s.langevin_step > 0.0))
    throw ConfigError("langevin.step_size: must be positive");

  s.diag_max_lag = cfg.get_size("diag.max_lag", 200);
  s.mode_radius = cfg.get_double("diag.mode_radius", 3.0 * s.target.sigma);
  if (!(s.mode_radius > 0.0))
    throw ConfigError("diag.mode_radius: must be positive");

  s.interp.gamma = cfg.get_double("interp.gamma", 2.0);
  s.interp.steps = cfg.get_size("interp.steps", 1000);
  s.interp.dt = cfg.get_double("interp.dt", 0.01);
  checked([&] { s.interp.validate(); });

  cfg.reject_unknown();
  s.echo = cfg.echo();
  return s;
}

}  // namespace febm
