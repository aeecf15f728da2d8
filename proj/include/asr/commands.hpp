// The synth, train, eval, and render commands behind the `asr` tool.
#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <vector>

namespace asr {

struct CommandArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::string out_dir;
  std::string checkpoint;
  /// Dataset archive overriding the configured held-out / render data.
  std::string dataset;
  bool resume = false;
};

/// Writes train.asrd and test.asrd.
void cmd_synth(const CommandArgs& args, std::ostream& out);
/// Writes log.csv, functionals.csv, and checkpoints.
void cmd_train(const CommandArgs& args, std::ostream& out);
/// Writes eval.csv and summary.txt.
void cmd_eval(const CommandArgs& args, std::ostream& out);
/// Writes grid.png.
void cmd_render(const CommandArgs& args, std::ostream& out);

/// 2 configuration, 3 numeric or other runtime failure, 4 I/O, 1 otherwise.
int exit_code_for(const std::exception& e);

/// Version string recorded in manifests.
std::string code_version();

}  // namespace asr
