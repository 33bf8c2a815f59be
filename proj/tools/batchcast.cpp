// batchcast <synth|train|evaluate|acf> --config <file> [--set k=v ...] --out <dir>

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "batchcast/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Correlated-error probabilistic forecasting"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir = ".";
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config,-c", config_path, "Experiment config (flat JSON)");
    sub->add_option("--set,-s", overrides, "Override a config key: key=value (value parsed as JSON)")
        ->allow_extra_args(false);
    sub->add_option("--out,-o", out_dir, "Output directory");
  };
  auto* synth = app.add_subcommand("synth", "Generate a synthetic AR(1)-noise dataset");
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  auto* evaluate = app.add_subcommand("evaluate", "Rolling probabilistic evaluation of a checkpoint");
  auto* acf = app.add_subcommand("acf", "Residual autocorrelation of a checkpoint");
  for (auto* sub : {synth, train, evaluate, acf}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = batchcast::load_config(config_path, overrides);
    if (synth->parsed()) batchcast::cmd_synth(cfg, out_dir, std::cout);
    if (train->parsed()) batchcast::cmd_train(cfg, out_dir, std::cout);
    if (evaluate->parsed()) batchcast::cmd_evaluate(cfg, out_dir, std::cout);
    if (acf->parsed()) batchcast::cmd_acf(cfg, out_dir, std::cout);
  } catch (const batchcast::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
