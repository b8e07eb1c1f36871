#pragma once

#include "bmd/matrix.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bmd {

struct RunConfig {
  /// fit, id-select, evaluate or export-plot-data.
  std::string verb = "fit";
  std::string model;
  Index k = 0;
  bool ard = false;
  int iters = 500;
  int burn_in = 250;
  int thin = 1;
  std::uint64_t seed = 0;
  std::string input;
  /// triplets or dense.
  std::string format = "dense";
  std::string out;
  /// Raw per-column importance scores, one per line (IID only).
  std::string importance;
  /// Directory holding exported factors (evaluate only).
  std::string factors;
  std::map<std::string, double> hyper;
  int chains = 1;
};

struct RunResult {
  double final_mse = 0.0;
  std::size_t n_selected = 0;
};

/// Model tags accepted by `fit` and `id-select`.
std::vector<std::string> fit_models();
std::vector<std::string> id_models();

/// Default hyperparameters for a model; NaN marks values resolved from the data.
std::map<std::string, double> hyper_defaults(const std::string &model, Index K);

/// Applies a key=value config file (the manifest format) onto `cfg`.
void apply_config_file(RunConfig &cfg, const std::string &path);

MaskedMatrix load_input(const std::string &path, const std::string &format);

/// Executes one configured verb and writes its artifacts under cfg.out.
RunResult run(const RunConfig &cfg);

} // namespace bmd
