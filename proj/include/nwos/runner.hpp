#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "nwos/benchmarks.hpp"
#include "nwos/trainer.hpp"

namespace nwos {

// Invalid configuration; the command line maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string subcommand;  // train | estimate | eval | optimize-control
  std::string problem;

  // Custom box problem, active when problem == "custom".
  int dim = 0;
  double lo = 0.0, hi = 1.0;
  std::string f_expr, g_expr, u_expr;

  std::string method = "buffered";  // or "vanilla"
  long width = 256;
  long depth = 6;
  TrainConfig train;

  std::string points_file;  // estimate input
  long n_walks = 10000;     // walks per estimate point
  std::string checkpoint;   // eval / optimize-control input
  long n_eval = 1000000;    // eval sample count
  bool oracle = false;      // optimize against the closed-form slice map
  double alpha = 1e-3;
  int grid = 64;

  std::string output_dir = ".";
  std::uint64_t seed = 0;
  int threads = 0;  // 0 -> hardware concurrency

  // Everything that affects results (excludes output_dir and threads), as
  // canonical dotted key=value pairs.
  std::map<std::string, std::string> semantic() const;
};

// Apply one configuration key. `section` may be empty for top-level keys
// ("problem", "seed", ...). Unknown keys throw ConfigError mentioning `where`.
void apply_key(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value, const std::string& where);

// "key = value" lines under [section] headers; '#'/';' comments. Unknown
// sections and keys are errors with file:line diagnostics.
void apply_config_file(RunConfig& cfg, const std::string& path);

// Build the configured problem (named instance or custom box expressions).
Problem resolve_problem(const RunConfig& cfg);

int run_train(const RunConfig& cfg);
int run_estimate(const RunConfig& cfg);
int run_eval(const RunConfig& cfg);
int run_optimize_control(const RunConfig& cfg);
int run(const RunConfig& cfg);  // dispatches on subcommand

}  // namespace nwos
