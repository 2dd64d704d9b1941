#pragma once

#include <string>

#include "febm/config.hpp"

namespace febm {

// Input/output locations supplied on the command line, as opposed to the
// run parameters carried by RunSettings.
struct CommandPaths {
  std::string out_dir = "out";
  std::string checkpoint;  // model input for sample / interpolate; optional
                           // backbone input for train-ebm / train-nce
  std::string chains;      // chain CSV input for diagnose
  std::string z1, z2;      // comma-separated interpolation endpoints;
                           // drawn from the prior when empty
};

// Each command writes its artifacts plus the effective-config echo under
// out_dir and reports progress on stdout. Errors surface as exceptions; the
// CLI maps them to exit codes.
void cmd_train_flow(const RunSettings& s, const CommandPaths& paths);
void cmd_train_ebm(const RunSettings& s, const CommandPaths& paths);
void cmd_train_nce(const RunSettings& s, const CommandPaths& paths);
void cmd_sample(const RunSettings& s, const CommandPaths& paths);
void cmd_diagnose(const RunSettings& s, const CommandPaths& paths);
void cmd_interpolate(const RunSettings& s, const CommandPaths& paths);
void cmd_demo2d(const RunSettings& s, const CommandPaths& paths);

}  // namespace febm
