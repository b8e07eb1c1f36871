#include "bmd/errors.hpp"
#include "bmd/run.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

void add_common(CLI::App *cmd, bmd::RunConfig &cfg, std::vector<std::string> &sets) {
  cmd->add_option("--input", cfg.input, "data file");
  cmd->add_option("--format", cfg.format, "triplets or dense")->check(CLI::IsMember({"triplets", "dense"}));
  cmd->add_option("--out", cfg.out, "output directory");
  cmd->add_option("--seed", cfg.seed, "random seed");
  cmd->add_option("--set", sets, "hyperparameter override key=value");
}

void add_sampler(CLI::App *cmd, bmd::RunConfig &cfg) {
  cmd->add_option("--model", cfg.model, "model name");
  cmd->add_option("--k", cfg.k, "number of factors or selected columns");
  cmd->add_option("--iters", cfg.iters, "iterations");
  cmd->add_option("--burn-in", cfg.burn_in, "burn-in iterations");
  cmd->add_option("--thin", cfg.thin, "thinning interval");
  cmd->add_option("--chains", cfg.chains, "independent chains run in parallel");
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Bayesian matrix decomposition"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "key=value run manifest")->check(CLI::ExistingFile);

  // Flags parse into a scratch config; only the ones given override the file.
  bmd::RunConfig flags;
  std::vector<std::string> sets;

  auto *fit = app.add_subcommand("fit", "fit a factorization model");
  add_common(fit, flags, sets);
  add_sampler(fit, flags);

  auto *idsel = app.add_subcommand("id-select", "interpolative decomposition");
  add_common(idsel, flags, sets);
  add_sampler(idsel, flags);
  idsel->add_flag("--ard", flags.ard, "infer the rank with ARD");
  idsel->add_option("--importance", flags.importance, "per-column importance scores");

  auto *eval = app.add_subcommand("evaluate", "score saved factors");
  add_common(eval, flags, sets);
  eval->add_option("--factors", flags.factors, "directory holding saved factors")->required();

  auto *exp = app.add_subcommand("export-plot-data", "convergence and autocorrelation tables");
  exp->add_option("--input", flags.input, "trace.csv or a run directory")->required();
  exp->add_option("--out", flags.out, "output directory")->required();
  exp->add_option("--burn-in", flags.burn_in, "burn-in iterations");

  CLI11_PARSE(app, argc, argv);

  try {
    bmd::RunConfig cfg;
    if (!config_path.empty())
      bmd::apply_config_file(cfg, config_path);
    auto *sub = app.get_subcommands().front();
    cfg.verb = sub->get_name();
    auto given = [&](const char *name) {
      auto *opt = sub->get_option_no_throw(name);
      return opt && opt->count() > 0;
    };
    if (given("--model")) cfg.model = flags.model;
    if (given("--k")) cfg.k = flags.k;
    if (given("--ard")) cfg.ard = flags.ard;
    if (given("--iters")) cfg.iters = flags.iters;
    if (given("--burn-in")) cfg.burn_in = flags.burn_in;
    if (given("--thin")) cfg.thin = flags.thin;
    if (given("--seed")) cfg.seed = flags.seed;
    if (given("--input")) cfg.input = flags.input;
    if (given("--format")) cfg.format = flags.format;
    if (given("--out")) cfg.out = flags.out;
    if (given("--importance")) cfg.importance = flags.importance;
    if (given("--factors")) cfg.factors = flags.factors;
    if (given("--chains")) cfg.chains = flags.chains;
    for (const auto &s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0)
        throw bmd::ConfigError("--set expects key=value, got '" + s + "'");
      try {
        cfg.hyper[s.substr(0, eq)] = std::stod(s.substr(eq + 1));
      } catch (const std::exception &) {
        throw bmd::ConfigError("--set value is not a number: '" + s + "'");
      }
    }
    auto r = bmd::run(cfg);
    if (cfg.verb == "fit" || cfg.verb == "id-select")
      std::cout << "final_mse=" << r.final_mse << "\n";
    return 0;
  } catch (const bmd::Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
