// splitmcmc command-line front end.
//
//   splitmcmc validate|predict|sample|scaling --config <path.json> --out <dir>
//             [--seed N] [--force] [--only NAME] [--perturb EPS]
//             [--cold-start]
//
// Exit codes: 0 success, 1 check failure, 2 config error.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "splitmcmc/splitmcmc.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Metropolis-Hastings with matrix-splitting proposals"};
  app.require_subcommand(1);

  splitmcmc::CliOptions opts;
  std::uint64_t seed_value = 0;
  bool seed_given = false;

  auto add_common = [&](CLI::App* cmd, bool config_required) {
    auto* c = cmd->add_option("--config", opts.config_path,
                              "experiment config JSON");
    if (config_required) c->required();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", seed_value, "seed override")
        ->each([&](const std::string&) { seed_given = true; });
    cmd->add_flag("--force", opts.force, "overwrite existing outputs");
  };

  CLI::App* validate = app.add_subcommand("validate",
                                          "run the identity check suite");
  add_common(validate, false);
  validate->add_option("--only", opts.only, "run a single named check");
  validate->add_option("--perturb", opts.perturb,
                       "inject a perturbation (harness self-test)");

  CLI::App* predict = app.add_subcommand("predict", "write theory tables");
  add_common(predict, true);

  CLI::App* sample = app.add_subcommand("sample",
                                        "run chains and compare with theory");
  add_common(sample, true);
  sample->add_flag("--cold-start", opts.cold_start,
                   "start chains from the proposal target instead of the "
                   "target (burn-in exploration)");

  CLI::App* scaling = app.add_subcommand("scaling",
                                         "dimension-scaling study");
  add_common(scaling, true);

  CLI11_PARSE(app, argc, argv);
  if (seed_given) opts.seed = seed_value;

  try {
    if (validate->parsed()) {
      return splitmcmc::cmd_validate(opts);
    }
    splitmcmc::ExperimentConfig cfg =
        splitmcmc::load_experiment_config(opts.config_path);
    if (predict->parsed()) return splitmcmc::cmd_predict(cfg, opts);
    if (sample->parsed()) return splitmcmc::cmd_sample(cfg, opts);
    if (scaling->parsed()) return splitmcmc::cmd_scaling(cfg, opts);
  } catch (const splitmcmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const splitmcmc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
