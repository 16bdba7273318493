#ifndef SDFILTER_CLI_HPP_
#define SDFILTER_CLI_HPP_

#include <optional>
#include <string>

#include "sdfilter/io.hpp"

namespace sdfilter::cli {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::optional<int> threads;
};

// Batch commands. Each reads a validated JSON config, runs the wrapped
// library operation, and writes its output files under out_dir. All throw
// sdfilter::Error subclasses; exit-code mapping happens in the binary.
void cmd_simulate(const Json &config, const GlobalOptions &opts);
void cmd_fit(const Json &config, const GlobalOptions &opts);
void cmd_filter(const Json &config, const GlobalOptions &opts);
void cmd_smooth(const Json &config, const GlobalOptions &opts);
void cmd_bands(const Json &config, const GlobalOptions &opts);
void cmd_experiment(const Json &config, const GlobalOptions &opts);

// Dispatch by subcommand name; loads the config file itself.
void run_command(const std::string &command, const GlobalOptions &opts);

// Exit-code contract: 0 success, 1 config/validation error, 2 numerical
// failure, 3 I/O error.
int exit_code_for_current_exception();

}  // namespace sdfilter::cli

#endif  // SDFILTER_CLI_HPP_
