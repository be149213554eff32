#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dynas/config.hpp"
#include "dynas/pipeline.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "experiment config (JSON)")->required();
  sub->add_option("--out", c.out, "output directory (overrides the config)");
  sub->add_option("--workers", c.workers, "worker threads (overrides the config)");
  sub->add_option("--seed", c.seed, "base seed (overrides the config)");
}

dynas::ExperimentConfig resolve(const Common& c) {
  auto cfg = dynas::load_config(c.config);
  if (c.out) cfg.output_dir = *c.out;
  if (c.workers) cfg.workers = *c.workers;
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-based dynamic algorithm selection experiments"};
  app.require_subcommand(1);

  Common common;
  struct Cmd {
    const char* name;
    const char* help;
    void (*fn)(const dynas::ExperimentConfig&, const dynas::pipeline::Log&);
  };
  const Cmd cmds[] = {
      {"static-run", "run every portfolio member for the full budget", dynas::pipeline::cmd_static_run},
      {"self-switch", "measure warm-start loss of switching to the same algorithm", dynas::pipeline::cmd_self_switch},
      {"sweep", "run the switch-point sweep and extract features", dynas::pipeline::cmd_sweep},
      {"train-eval", "leave-one-function-out model evaluation", dynas::pipeline::cmd_train_eval},
      {"report", "summarize evaluation outputs", dynas::pipeline::cmd_report},
  };
  for (const auto& c : cmds) add_common(app.add_subcommand(c.name, c.help), common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(common);
    const auto log = [](const std::string& m) { std::cerr << m << std::endl; };
    for (const auto& c : cmds)
      if (app.got_subcommand(c.name)) c.fn(cfg, log);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
