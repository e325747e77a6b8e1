// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include <CLI11.hpp>

#include "camlab/cli/commands.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  int workers = 1;
};

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, Common& c) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("--config", c.config, "config file with key = value lines")->check(CLI::ExistingFile);
  sub->add_option("--set", c.overrides, "override one key, e.g. --set model.family=att")->take_all();
  sub->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"camlab: exact link-prediction instances, CAM-conditioned predictors and graph diffusion"};
  app.require_subcommand(1);
  Common c;
  bool resume = false;
  auto* gen = add_command(app, "generate", "generate train/val/test splits", c);
  auto* train = add_command(app, "train", "train a supervised, VAE or diffusion model", c);
  train->add_flag("--resume", resume, "continue from <train.out>/model.ckpt");
  auto* sample = add_command(app, "sample", "write predictions for a coordinate file", c);
  auto* eval = add_command(app, "eval", "score predictions or a checkpoint against a split", c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto cfg = camlab::cli::load_config(c.config, c.overrides);
    camlab::cli::Options opts{c.workers, resume};
    if (gen->parsed()) camlab::cli::cmd_generate(cfg, opts, std::cout);
    if (train->parsed()) camlab::cli::cmd_train(cfg, opts, std::cout);
    if (sample->parsed()) camlab::cli::cmd_sample(cfg, opts, std::cout);
    if (eval->parsed()) camlab::cli::cmd_eval(cfg, opts, std::cout);
  } catch (const camlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
