#include "bmd/run.hpp"

#include "bmd/baselines.hpp"
#include "bmd/discrete.hpp"
#include "bmd/errors.hpp"
#include "bmd/interpolative.hpp"
#include "bmd/io.hpp"
#include "bmd/nmf.hpp"
#include "bmd/rmf.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;

namespace bmd {

namespace {

const double kAuto = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool contains(const std::vector<std::string> &v, const std::string &s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::map<std::string, double> with_sigma(std::map<std::string, double> m, double a = 1.0,
                                         double b = 1.0) {
  m["alpha_sigma"] = a;
  m["beta_sigma"] = b;
  return m;
}

} // namespace

std::vector<std::string> fit_models() {
  return {"als",  "nmf-mu", "ggg",  "gggm",  "ggga", "gggw",    "gvg", "gee",  "geea",
          "gtt",  "gttn",   "grr",  "grrn",  "gl12", "gl22",    "glinf", "gl2inf2", "geg",
          "gnvg", "geee",   "paa",  "paaa",  "oggw"};
}

std::vector<std::string> id_models() { return {"id-exact", "gbt", "gbtn", "gbt-aggressive", "iid"}; }

std::map<std::string, double> hyper_defaults(const std::string &model, Index K) {
  const double k1 = static_cast<double>(K) + 1.0;
  if (model == "als")
    return {{"lambda_w", 0.1}, {"lambda_z", 0.1}, {"tol", 1e-9}, {"bias", 0.0}};
  if (model == "nmf-mu")
    return {{"lambda_w", 0.0}, {"lambda_z", 0.0}, {"eps", 1e-9}, {"tol", 1e-9}};
  if (model == "ggg" || model == "gggm" || model == "gee" || model == "geg")
    return with_sigma({{"lambda_w", 0.1}, {"lambda_z", 0.1}});
  if (model == "ggga" || model == "geea")
    return with_sigma({{"alpha_lambda", 1.0}, {"beta_lambda", 1.0}});
  if (model == "gggw")
    return with_sigma({{"kappa0", 1.0}, {"nu0", k1}, {"s0", 1.0}});
  if (model == "gvg" || model == "gnvg")
    return with_sigma({{"gamma", 1.0}, {"lambda_z", 0.1}});
  if (model == "gtt")
    return with_sigma({{"mu", 0.0}, {"tau", 0.1}});
  if (model == "gttn")
    return with_sigma({{"mu", 0.0}, {"tau", 0.1}, {"mu_mu", 0.0}, {"tau_mu", 0.1}, {"a", 1.0}, {"b", 1.0}});
  if (model == "grr")
    return with_sigma({{"mu", 0.0}, {"tau", 0.1}, {"lambda", 0.1}});
  if (model == "grrn")
    return with_sigma({{"mu", 0.0},
                       {"tau", 0.1},
                       {"lambda", 0.1},
                       {"mu_mu", 0.0},
                       {"tau_mu", 0.1},
                       {"a", 1.0},
                       {"b", 1.0},
                       {"alpha_lambda", 1.0},
                       {"beta_lambda", kAuto}});
  if (model == "gl12" || model == "gl22" || model == "glinf" || model == "gl2inf2")
    return with_sigma({{"lambda", 0.1}});
  if (model == "geee")
    return with_sigma({{"l", static_cast<double>(K)}, {"lambda_w", 0.1}, {"lambda_f", 0.1}, {"lambda_z", 0.1}});
  if (model == "paa")
    return {{"alpha", 1.0}, {"beta", 1.0}};
  if (model == "paaa")
    return {{"alpha", 1.0}, {"a", 1.0}, {"b", 1.0}};
  if (model == "oggw")
    return {{"categories", kAuto}, {"kappa0", 1.0}, {"nu0", k1},       {"s0", 1.0},
            {"alpha_tau", 1.0},    {"beta_tau", 1.0}};
  if (model == "id-exact")
    return {};
  if (model == "gbt" || model == "gbt-aggressive" || model == "iid" || model == "gbtn") {
    std::map<std::string, double> m{{"a", -1.0}, {"b", 1.0}, {"alpha_sigma", 0.1}, {"beta_sigma", 1.0},
                                    {"mu", 0.0}, {"tau", 1.0}, {"nu", 5.0}};
    if (model == "gbtn") {
      m["mu_mu"] = 0.0;
      m["tau_mu"] = 0.1;
      m["alpha_t"] = 1.0;
      m["beta_t"] = 1.0;
    }
    return m;
  }
  throw ConfigError("unknown model '" + model + "'");
}

void apply_config_file(RunConfig &cfg, const std::string &path) {
  for (const auto &[key, val] : read_key_values(path)) {
    try {
      if (key == "verb")
        cfg.verb = val;
      else if (key == "model")
        cfg.model = val;
      else if (key == "k")
        cfg.k = std::stol(val);
      else if (key == "ard")
        cfg.ard = val == "1" || val == "true";
      else if (key == "iters")
        cfg.iters = std::stoi(val);
      else if (key == "burn_in")
        cfg.burn_in = std::stoi(val);
      else if (key == "thin")
        cfg.thin = std::stoi(val);
      else if (key == "seed")
        cfg.seed = std::stoull(val);
      else if (key == "input")
        cfg.input = val;
      else if (key == "format")
        cfg.format = val;
      else if (key == "out")
        cfg.out = val;
      else if (key == "importance")
        cfg.importance = val;
      else if (key == "factors")
        cfg.factors = val;
      else if (key == "chains")
        cfg.chains = std::stoi(val);
      else if (key.rfind("hyper.", 0) == 0)
        cfg.hyper[key.substr(6)] = std::stod(val);
      else if (key.rfind("result.", 0) == 0)
        continue;
      else
        throw ConfigError("unknown config key '" + key + "'");
    } catch (const std::invalid_argument &) {
      throw ConfigError("bad value for '" + key + "': " + val);
    } catch (const std::out_of_range &) {
      throw ConfigError("value out of range for '" + key + "': " + val);
    }
  }
}

MaskedMatrix load_input(const std::string &path, const std::string &format) {
  if (path.empty())
    throw ConfigError("--input is required");
  if (format == "triplets")
    return load_triplets(path);
  if (format == "dense")
    return load_dense(path);
  throw ConfigError("format must be triplets or dense");
}

namespace {

std::string join(const std::vector<std::string> &v) {
  std::string s;
  for (const auto &x : v)
    s += (s.empty() ? "" : ", ") + x;
  return s;
}

std::map<std::string, double> resolve_hypers(const RunConfig &cfg, const std::string &model,
                                             const MaskedMatrix &A) {
  auto h = hyper_defaults(model, cfg.k);
  for (const auto &[k, v] : cfg.hyper) {
    if (!h.count(k)) {
      std::vector<std::string> keys;
      for (const auto &kv : h)
        keys.push_back(kv.first);
      throw ConfigError("unknown hyperparameter '" + k + "' for model " + model +
                        "; valid keys: " + (keys.empty() ? std::string("(none)") : join(keys)));
    }
    h[k] = v;
  }
  if (model == "grrn" && std::isnan(h["beta_lambda"])) {
    double m0 = A.observed_mean();
    h["beta_lambda"] = m0 > 0.0 ? std::sqrt(m0 / static_cast<double>(cfg.k)) : 1.0;
  }
  if (model == "oggw" && std::isnan(h["categories"])) {
    double mx = 1.0;
    for (Index i = 0; i < A.rows(); ++i)
      for (Index j = 0; j < A.cols(); ++j)
        if (A.mask(i, j))
          mx = std::max(mx, A.values(i, j));
    h["categories"] = std::max(2.0, std::floor(mx));
  }
  return h;
}

struct Output {
  fs::path dir;
  void ensure() const { fs::create_directories(dir); }
  std::string file(const std::string &name) const { return (dir / name).string(); }
};

void write_trace_csv(const std::string &path, const std::vector<double> &mse) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw InputError("cannot write " + path);
  out << "iteration,mse\n";
  for (std::size_t i = 0; i < mse.size(); ++i)
    out << (i + 1) << "," << format_double(mse[i]) << "\n";
}

void write_manifest(const std::string &path, const RunConfig &cfg, const std::string &model,
                    const std::map<std::string, double> &hyper,
                    const std::map<std::string, std::string> &results) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw InputError("cannot write " + path);
  out << "verb=" << cfg.verb << "\n";
  out << "model=" << model << "\n";
  out << "k=" << cfg.k << "\n";
  out << "ard=" << (cfg.ard ? 1 : 0) << "\n";
  out << "iters=" << cfg.iters << "\n";
  out << "burn_in=" << cfg.burn_in << "\n";
  out << "thin=" << cfg.thin << "\n";
  out << "seed=" << cfg.seed << "\n";
  out << "input=" << cfg.input << "\n";
  out << "format=" << cfg.format << "\n";
  if (!cfg.importance.empty())
    out << "importance=" << cfg.importance << "\n";
  for (const auto &[k, v] : hyper)
    out << "hyper." << k << "=" << format_double(v) << "\n";
  for (const auto &[k, v] : results)
    out << "result." << k << "=" << v << "\n";
}

GibbsConfig gibbs_config(const RunConfig &cfg) {
  GibbsConfig g;
  g.iters = cfg.iters;
  g.burn_in = cfg.iters == 0 ? 0 : cfg.burn_in;
  g.thin = cfg.thin;
  g.seed = cfg.seed;
  g.validate();
  return g;
}

// Round-trips factors through their text form so reported numbers match the files.
Mat written(const Output &o, const std::string &name, const Mat &X) {
  write_matrix(o.file(name), X);
  return read_matrix(o.file(name));
}

RunResult run_fit(const RunConfig &cfg, const std::string &model, const MaskedMatrix &A,
                  const std::map<std::string, double> &hp, const Output &o) {
  if (cfg.k < 1)
    throw ConfigError("--k must be at least 1");
  const Index K = cfg.k;
  std::vector<double> trace;
  FactorState S;
  std::map<std::string, std::string> results;
  if (model == "als" || model == "nmf-mu") {
    Rng rng(cfg.seed);
    FitResult fr;
    if (model == "als") {
      AlsConfig c;
      c.K = K;
      c.lambda_w = hp.at("lambda_w");
      c.lambda_z = hp.at("lambda_z");
      c.tol = hp.at("tol");
      c.bias = hp.at("bias") != 0.0;
      c.max_iters = cfg.iters;
      fr = als_fit(A, c, rng);
    } else {
      NmfConfig c;
      c.K = K;
      c.lambda_w = hp.at("lambda_w");
      c.lambda_z = hp.at("lambda_z");
      c.eps = hp.at("eps");
      c.tol = hp.at("tol");
      c.max_iters = cfg.iters;
      fr = nmf_mu_fit(A, c, rng);
    }
    for (std::size_t i = 1; i < fr.loss.size(); ++i)
      trace.push_back(fr.loss[i] / static_cast<double>(A.n_observed()));
    S = fr.state;
    results["sweeps"] = std::to_string(fr.sweeps);
  } else {
    GibbsConfig g = gibbs_config(cfg);
    GibbsTrace tr;
    static const std::map<std::string, RmfModel> rmf{{"ggg", RmfModel::GGG},
                                                     {"gggm", RmfModel::GGGM},
                                                     {"ggga", RmfModel::GGGA},
                                                     {"gggw", RmfModel::GGGW},
                                                     {"gvg", RmfModel::GVG}};
    static const std::map<std::string, NmfModel> nmf{
        {"gee", NmfModel::GEE},         {"geea", NmfModel::GEEA},   {"gtt", NmfModel::GTT},
        {"gttn", NmfModel::GTTN},       {"grr", NmfModel::GRR},     {"grrn", NmfModel::GRRN},
        {"gl12", NmfModel::GL12},       {"gl22", NmfModel::GL22},   {"glinf", NmfModel::GLinf},
        {"gl2inf2", NmfModel::GL2inf2}, {"geg", NmfModel::GEG},     {"gnvg", NmfModel::GnVG},
        {"geee", NmfModel::GEEE}};
    auto get = [&](const char *k, double fallback) {
      auto it = hp.find(k);
      return it == hp.end() ? fallback : it->second;
    };
    if (rmf.count(model)) {
      RmfHyper h;
      h.lambda_w = get("lambda_w", h.lambda_w);
      h.lambda_z = get("lambda_z", h.lambda_z);
      h.alpha_sigma = get("alpha_sigma", h.alpha_sigma);
      h.beta_sigma = get("beta_sigma", h.beta_sigma);
      h.alpha_lambda = get("alpha_lambda", h.alpha_lambda);
      h.beta_lambda = get("beta_lambda", h.beta_lambda);
      h.gamma = get("gamma", h.gamma);
      if (model == "gggw") {
        NiwParams p = NiwParams::standard(K);
        p.kappa0 = hp.at("kappa0");
        p.nu0 = hp.at("nu0");
        p.S0 = hp.at("s0") * Mat::Identity(K, K);
        h.niw = p;
      }
      tr = fit_rmf(rmf.at(model), A, K, h, g);
    } else if (nmf.count(model)) {
      NmfHyper h;
      h.lambda_w = get("lambda_w", h.lambda_w);
      h.lambda_z = get("lambda_z", h.lambda_z);
      h.alpha_sigma = get("alpha_sigma", h.alpha_sigma);
      h.beta_sigma = get("beta_sigma", h.beta_sigma);
      h.alpha_lambda = get("alpha_lambda", h.alpha_lambda);
      h.beta_lambda = get("beta_lambda", h.beta_lambda);
      h.tn_mu = get("mu", h.tn_mu);
      h.tn_tau = get("tau", h.tn_tau);
      h.rn_lambda = get("lambda", h.rn_lambda);
      h.mu_mu = get("mu_mu", h.mu_mu);
      h.tau_mu = get("tau_mu", h.tau_mu);
      h.a = get("a", h.a);
      h.b = get("b", h.b);
      h.norm_lambda = get("lambda", h.norm_lambda);
      h.lambda_f = get("lambda_f", h.lambda_f);
      h.gamma = get("gamma", h.gamma);
      h.L = static_cast<Index>(get("l", 0.0));
      if (model == "grrn")
        h.grrn_beta_lambda = hp.at("beta_lambda");
      tr = fit_nmf(nmf.at(model), A, K, h, g);
    } else if (model == "paa" || model == "paaa") {
      PoissonHyper h;
      h.alpha = hp.at("alpha");
      if (model == "paa") {
        h.beta = hp.at("beta");
        tr = fit_paa(A, K, h, g);
      } else {
        h.a = hp.at("a");
        h.b = hp.at("b");
        tr = fit_paaa(A, K, h, g);
      }
    } else if (model == "oggw") {
      OrdinalHyper h;
      h.spec = OrdinalSpec::integer_scale(static_cast<int>(hp.at("categories")));
      NiwParams p = NiwParams::standard(K);
      p.kappa0 = hp.at("kappa0");
      p.nu0 = hp.at("nu0");
      p.S0 = hp.at("s0") * Mat::Identity(K, K);
      h.niw = p;
      h.alpha_tau = hp.at("alpha_tau");
      h.beta_tau = hp.at("beta_tau");
      tr = fit_oggw(A, K, h, g);
      FactorState pm = tr.posterior_mean();
      results["expected_category_mse"] = format_double(masked_mse(A, oggw_predict(pm, h.spec)));
    } else {
      throw ConfigError("model '" + model + "' is not a factorization model");
    }
    trace = tr.mse;
    S = tr.posterior_mean();
    results["samples"] = std::to_string(tr.samples.size());
    results["sigma2"] = format_double(S.sigma2);
  }
  o.ensure();
  write_trace_csv(o.file("trace.csv"), trace);
  FactorState R;
  R.W = written(o, "W.txt", S.W);
  R.Z = written(o, "Z.txt", S.Z);
  if (S.F)
    R.F = written(o, "F.txt", *S.F);
  RunResult res;
  res.final_mse = masked_mse(A, R);
  results["final_mse"] = format_double(res.final_mse);
  write_manifest(o.file("manifest.txt"), cfg, model, hp, results);
  return res;
}

Vec read_importance(const std::string &path, Index N) {
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open " + path);
  std::vector<double> v;
  double x;
  while (in >> x)
    v.push_back(x);
  if (!in.eof())
    throw ParseError(path + ": importance scores must be numbers");
  if (static_cast<Index>(v.size()) != N)
    throw DimensionError("importance file needs one score per column");
  return importance_from_scores(Eigen::Map<Vec>(v.data(), static_cast<Index>(v.size())));
}

RunResult run_id(const RunConfig &cfg, const std::string &model, const MaskedMatrix &A,
                 const std::map<std::string, double> &hp, const Output &o) {
  ColumnId id;
  std::vector<double> trace;
  std::map<std::string, std::string> results;
  if (!cfg.importance.empty() && model != "iid")
    throw ConfigError("--importance applies only to the iid model");
  if (model == "id-exact") {
    if (!A.fully_observed())
      throw InputError("exact ID needs a fully observed matrix");
    id = exact_column_id(A.values, cfg.k);
  } else {
    IdHyper h;
    h.a = hp.at("a");
    h.b = hp.at("b");
    h.alpha_sigma = hp.at("alpha_sigma");
    h.beta_sigma = hp.at("beta_sigma");
    h.mu = hp.at("mu");
    h.tau = hp.at("tau");
    h.nu = static_cast<int>(hp.at("nu"));
    if (model == "gbtn") {
      h.mu_mu = hp.at("mu_mu");
      h.tau_mu = hp.at("tau_mu");
      h.alpha_t = hp.at("alpha_t");
      h.beta_t = hp.at("beta_t");
    }
    IdVariant v;
    if (model == "gbt")
      v = cfg.ard ? IdVariant::GBT_ARD : IdVariant::GBT;
    else if (model == "gbtn")
      v = cfg.ard ? IdVariant::GBTN_ARD : IdVariant::GBTN;
    else if (model == "gbt-aggressive")
      v = IdVariant::GBT_aggressive;
    else
      v = IdVariant::IID;
    if (cfg.ard && model != "gbt" && model != "gbtn")
      throw ConfigError("--ard applies to gbt and gbtn");
    if (model == "iid") {
      if (cfg.importance.empty())
        throw ConfigError("iid needs --importance");
      h.importance = read_importance(cfg.importance, A.cols());
    }
    if (!cfg.ard && cfg.k < 1)
      throw ConfigError("--k must be at least 1 unless --ard is set");
    IdTrace tr = fit_id(v, A, cfg.k, h, gibbs_config(cfg), IdInit::random);
    trace = tr.mse;
    id = post_process(A, tr.state);
    if (!tr.selections.empty())
      results["modal_rank"] = std::to_string(tr.modal_rank());
  }
  o.ensure();
  write_trace_csv(o.file("trace.csv"), trace);
  {
    std::ofstream js(o.file("selected.json"), std::ios::binary | std::ios::trunc);
    nlohmann::json arr = id.J;
    js << arr.dump() << "\n";
  }
  Mat C = written(o, "C.txt", id.C);
  Mat W = written(o, "W.txt", id.W);
  RunResult res;
  res.n_selected = id.J.size();
  res.final_mse = masked_mse(A, Mat(C * W));
  results["final_mse"] = format_double(res.final_mse);
  results["n_selected"] = std::to_string(res.n_selected);
  write_manifest(o.file("manifest.txt"), cfg, model, hp, results);
  return res;
}

RunResult run_evaluate(const RunConfig &cfg) {
  MaskedMatrix A = load_input(cfg.input, cfg.format);
  if (cfg.factors.empty())
    throw ConfigError("evaluate needs --factors");
  fs::path d(cfg.factors);
  Mat P;
  if (fs::exists(d / "C.txt")) {
    P = read_matrix((d / "C.txt").string()) * read_matrix((d / "W.txt").string());
  } else {
    Mat W = read_matrix((d / "W.txt").string());
    Mat Z = read_matrix((d / "Z.txt").string());
    P = fs::exists(d / "F.txt") ? Mat(W * read_matrix((d / "F.txt").string()) * Z) : Mat(W * Z);
  }
  RunResult r;
  r.final_mse = masked_mse(A, P);
  std::string text = "mse=" + format_double(r.final_mse) + "\nrmse=" + format_double(std::sqrt(r.final_mse)) + "\n";
  std::cout << text;
  if (!cfg.out.empty()) {
    Output o{cfg.out};
    o.ensure();
    std::ofstream(o.file("evaluation.txt"), std::ios::binary | std::ios::trunc) << text;
  }
  return r;
}

RunResult run_export(const RunConfig &cfg) {
  fs::path in(cfg.input);
  if (fs::is_directory(in))
    in /= "trace.csv";
  auto tr = read_trace(in.string());
  if (cfg.out.empty())
    throw ConfigError("export-plot-data needs --out");
  Output o{cfg.out};
  o.ensure();
  std::ofstream conv(o.file("convergence.csv"), std::ios::binary | std::ios::trunc);
  conv << "iteration,mse,running_mean\n";
  double sum = 0.0;
  int count = 0;
  std::vector<double> post;
  for (auto [it, v] : tr) {
    conv << it << "," << format_double(v) << ",";
    if (it > cfg.burn_in) {
      sum += v;
      ++count;
      post.push_back(v);
      conv << format_double(sum / count);
    }
    conv << "\n";
  }
  std::ofstream ac(o.file("autocorr.csv"), std::ios::binary | std::ios::trunc);
  ac << "lag,acf\n";
  if (post.size() >= 2) {
    double mean = 0.0;
    for (double v : post)
      mean += v;
    mean /= static_cast<double>(post.size());
    double c0 = 0.0;
    for (double v : post)
      c0 += (v - mean) * (v - mean);
    std::size_t maxlag = std::min<std::size_t>(50, post.size() - 1);
    for (std::size_t lag = 0; lag <= maxlag; ++lag) {
      double c = 0.0;
      for (std::size_t t = 0; t + lag < post.size(); ++t)
        c += (post[t] - mean) * (post[t + lag] - mean);
      ac << lag << "," << format_double(c0 > 0.0 ? c / c0 : (lag == 0 ? 1.0 : 0.0)) << "\n";
    }
  }
  return RunResult{};
}

RunResult run_single(const RunConfig &cfg) {
  std::string model = lower(cfg.model);
  bool is_fit = contains(fit_models(), model);
  bool is_id = contains(id_models(), model);
  if (!is_fit && !is_id)
    throw ConfigError("unknown model '" + cfg.model + "'; valid: " + join(fit_models()) + ", " +
                      join(id_models()));
  if (cfg.verb == "fit" && !is_fit)
    throw ConfigError("model '" + model + "' belongs to id-select");
  if (cfg.verb == "id-select" && !is_id)
    throw ConfigError("model '" + model + "' belongs to fit");
  if (cfg.out.empty())
    throw ConfigError("--out is required");
  MaskedMatrix A = load_input(cfg.input, cfg.format);
  auto hp = resolve_hypers(cfg, model, A);
  Output o{cfg.out};
  return is_fit ? run_fit(cfg, model, A, hp, o) : run_id(cfg, model, A, hp, o);
}

} // namespace

RunResult run(const RunConfig &cfg) {
  if (cfg.verb == "evaluate")
    return run_evaluate(cfg);
  if (cfg.verb == "export-plot-data")
    return run_export(cfg);
  if (cfg.verb != "fit" && cfg.verb != "id-select")
    throw ConfigError("unknown verb '" + cfg.verb + "'");
  if (cfg.chains < 1)
    throw ConfigError("--chains must be at least 1");
  if (cfg.chains == 1)
    return run_single(cfg);
  std::vector<RunResult> results(static_cast<std::size_t>(cfg.chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.chains));
  std::vector<std::thread> threads;
  for (int c = 0; c < cfg.chains; ++c) {
    threads.emplace_back([&, c] {
      try {
        RunConfig one = cfg;
        one.chains = 1;
        one.seed = cfg.seed + static_cast<std::uint64_t>(c);
        one.out = (fs::path(cfg.out) / ("chain_" + std::to_string(c))).string();
        results[static_cast<std::size_t>(c)] = run_single(one);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    });
  }
  for (auto &t : threads)
    t.join();
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
  return results.front();
}

} // namespace bmd
