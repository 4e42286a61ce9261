#include <cstdlib>
#include <deque>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nwos/runner.hpp"

namespace {

struct Binding {
  CLI::Option* opt;
  std::string key;        // canonical configuration key
  const std::string* value;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"walk-on-spheres solver and neural-solver trainer for Poisson problems"};
  app.require_subcommand(1);

  std::deque<std::string> storage;  // stable addresses for option targets
  std::vector<Binding> bindings;
  auto bind = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                  const std::string& help) {
    storage.emplace_back();
    CLI::Option* o = sub->add_option(flag, storage.back(), help)->take_last();
    bindings.push_back({o, key, &storage.back()});
  };

  std::string config_path;
  std::vector<std::string> overrides;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "configuration file ([section] + key = value lines)");
    sub->add_option("--set", overrides,
                    "extra 'section.key=value' override, repeatable; named flags win over it");
    bind(sub, "--problem", "problem", "benchmark name (laplace10, poisson50, ...) or 'custom'");
    bind(sub, "--seed", "seed", "seed for every random stream of the run");
    bind(sub, "--threads", "threads", "worker threads (0 = all cores)");
    bind(sub, "--output-dir", "output_dir", "directory for result files");
  };

  CLI::App* train = app.add_subcommand("train", "fit a network to a problem and save it");
  common(train);
  bind(train, "--method", "method", "vanilla (fresh walks each step) or buffered (replay buffer)");
  bind(train, "--width", "net.width", "hidden neurons per layer");
  bind(train, "--depth", "net.depth", "hidden layers");
  bind(train, "--iterations", "train.iterations", "gradient steps");
  bind(train, "--domain-batch", "train.domain_batch", "interior points per buffer update");
  bind(train, "--budget-seconds", "train.budget_seconds", "wall-clock stop, whichever comes first");
  bind(train, "--epsilon", "wos.epsilon", "boundary shell width for the walks");
  bind(train, "--max-steps", "wos.max_steps", "walk truncation depth (-1 walks to the shell)");
  bind(train, "--lr0", "adam.lr0", "initial learning rate");
  bind(train, "--eval-points", "train.eval_points", "rel-L2 sample size per log entry (0 = skip)");
  bind(train, "--log-every", "train.log_every", "iterations between convergence-log entries");

  CLI::App* estimate =
      app.add_subcommand("estimate", "Monte-Carlo solution estimates at points from a CSV");
  common(estimate);
  bind(estimate, "--points", "estimate.points", "CSV of evaluation points, one per row");
  bind(estimate, "--n-walks", "estimate.n_walks", "trajectories per point");
  bind(estimate, "--epsilon", "wos.epsilon", "boundary shell width for the walks");

  CLI::App* eval = app.add_subcommand("eval", "relative L2 error of a saved model");
  common(eval);
  bind(eval, "--checkpoint", "eval.checkpoint", "saved model file");
  bind(eval, "--n-eval", "eval.n_eval", "Monte-Carlo sample size");

  CLI::App* control =
      app.add_subcommand("optimize-control", "fit the forcing amplitude/frequencies to a target");
  common(control);
  bind(control, "--checkpoint", "control.checkpoint", "saved parametric model file");
  bind(control, "--alpha", "control.alpha", "penalty weight on the forcing energy");
  bind(control, "--grid", "control.grid", "midpoint quadrature resolution per axis");
  CLI::Option* oracle_flag =
      control->add_flag("--oracle", "optimize the closed-form slice map instead of a model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // 0 is help/version, anything else is bad usage
  }

  try {
    nwos::RunConfig cfg;
    CLI::App* sub = app.get_subcommands().front();
    cfg.subcommand = sub->get_name();

    if (!config_path.empty()) nwos::apply_config_file(cfg, config_path);
    if (const char* env = std::getenv("NWOS_OUTPUT_DIR")) cfg.output_dir = env;
    for (const std::string& item : overrides) {
      auto eq = item.find('=');
      if (eq == std::string::npos)
        throw nwos::ConfigError("--set " + item + ": expected section.key=value");
      nwos::apply_key(cfg, "", item.substr(0, eq), item.substr(eq + 1), "--set " + item);
    }
    for (const Binding& b : bindings)
      if (b.opt->count() > 0) apply_key(cfg, "", b.key, *b.value, "flag " + b.opt->get_name());
    if (oracle_flag->count() > 0) apply_key(cfg, "", "control.oracle", "true", "flag --oracle");

    return nwos::run(cfg);
  } catch (const nwos::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
