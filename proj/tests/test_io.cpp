#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bmd/errors.hpp"
#include "bmd/io.hpp"
#include "bmd/run.hpp"
#include "support.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <sys/wait.h>
#include <unistd.h>

using namespace bmd;
namespace fs = std::filesystem;

namespace {

const std::string kFixture = std::string(BMD_DATA_DIR) + "/fixture_10x8.txt";

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("bmd_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string &name) const { return (path / name).string(); }
};

void write_text(const std::string &path, const std::string &text) { std::ofstream(path) << text; }

std::string read_text(const std::string &path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string &args, const std::string &log) {
  std::string cmd = std::string(BMD_CLI) + " " + args + " > " + log + " 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

using Cell = std::tuple<Index, Index, double>;

std::set<Cell> cells(const MaskedMatrix &A) {
  std::set<Cell> s;
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      if (A.mask(i, j))
        s.insert({i, j, A.values(i, j)});
  return s;
}

} // namespace

TEST_CASE("triplet loading") {
  TempDir d;
  write_text(d.file("a.csv"), "0,0,5\n1,2,3\n");
  MaskedMatrix A = load_triplets(d.file("a.csv"));
  CHECK(A.rows() == 2);
  CHECK(A.cols() == 3);
  CHECK(A.n_observed() == 2);
  CHECK(A.values(0, 0) == 5);
  CHECK(A.values(1, 2) == 3);

  write_text(d.file("one.csv"), "1,1,2.5\n2,3,-1\n");
  MaskedMatrix B = load_triplets(d.file("one.csv"));
  CHECK(B.rows() == 2);
  CHECK(B.cols() == 3);
  CHECK(B.values(1, 2) == -1);

  write_text(d.file("dup.csv"), "0,0,1\n0,0,4\n1,1,2\n");
  std::vector<std::string> warnings;
  MaskedMatrix C = load_triplets(d.file("dup.csv"), &warnings);
  CHECK(C.values(0, 0) == 4);
  CHECK(warnings.size() == 1);

  write_text(d.file("empty.csv"), "");
  CHECK_THROWS_AS(load_triplets(d.file("empty.csv")), EmptyMaskError);
  write_text(d.file("bad.csv"), "0,0,1\n0,x,2\n");
  try {
    load_triplets(d.file("bad.csv"));
    FAIL("no parse error");
  } catch (const ParseError &e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_triplets(d.file("missing.csv")), InputError);
}

TEST_CASE("triplet round trip") {
  TempDir d;
  Rng rng(1);
  std::uniform_int_distribution<int> row(0, 29), col(0, 19);
  std::normal_distribution<double> val(0.0, 3.0);
  std::set<std::pair<int, int>> used;
  std::ostringstream text;
  text.precision(17);
  while (used.size() < 100) {
    int r = row(rng), c = col(rng);
    if (!used.insert({r, c}).second)
      continue;
    text << r << "," << c << "," << val(rng) << "\n";
  }
  used.insert({29, 19});
  text << "29,19,1.25\n";
  write_text(d.file("in.csv"), text.str());
  MaskedMatrix A = load_triplets(d.file("in.csv"));
  write_triplets(d.file("out.csv"), A);
  MaskedMatrix B = load_triplets(d.file("out.csv"));
  CHECK(cells(A) == cells(B));
  CHECK(cells(A).size() == 101);
}

TEST_CASE("dense loading") {
  TempDir d;
  write_text(d.file("a.txt"), "1 2\n3 NA\n");
  MaskedMatrix A = load_dense(d.file("a.txt"));
  CHECK(A.rows() == 2);
  CHECK(A.cols() == 2);
  CHECK(A.n_observed() == 3);
  CHECK(!A.mask(1, 1));
  write_text(d.file("ragged.txt"), "1 2\n3\n");
  CHECK_THROWS_AS(load_dense(d.file("ragged.txt")), DimensionError);
  write_text(d.file("bad.txt"), "1 2\n3 q\n");
  CHECK_THROWS_AS(load_dense(d.file("bad.txt")), ParseError);

  Rng rng(2);
  Mat v = testing::random_normal(7, 5, rng, 1e3);
  Mask m = testing::random_mask(7, 5, 0.7, rng);
  MaskedMatrix M(v, m);
  write_dense(d.file("rt.txt"), M);
  MaskedMatrix R = load_dense(d.file("rt.txt"));
  CHECK(cells(R) == cells(M));
  CHECK(R.mask == M.mask);

  MaskedMatrix F = load_dense(kFixture);
  CHECK(F.rows() == 10);
  CHECK(F.cols() == 8);
  CHECK(F.n_observed() == 80 - 6);
}

TEST_CASE("number formatting") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 1e22})
    CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("fit run writes its artifacts") {
  TempDir d;
  std::string args = "fit --model ggg --k 3 --iters 60 --burn-in 30 --seed 7 --input " + kFixture;
  REQUIRE(cli(args + " --out " + d.file("a"), d.file("log")) == 0);
  REQUIRE(cli(args + " --out " + d.file("b"), d.file("log")) == 0);
  auto trace = read_trace(d.file("a/trace.csv"));
  CHECK(trace.size() == 60);
  CHECK(trace.front().first == 1);
  CHECK(trace.back().first == 60);
  for (const char *f : {"trace.csv", "W.txt", "Z.txt", "manifest.txt"})
    CHECK(read_text(d.file(std::string("a/") + f)) == read_text(d.file(std::string("b/") + f)));

  auto man = read_key_values(d.file("a/manifest.txt"));
  CHECK(man.at("seed") == "7");
  CHECK(man.at("model") == "ggg");
  CHECK(man.count("hyper.lambda_w") == 1);

  // Exported factors reproduce the recorded error.
  MaskedMatrix A = load_dense(kFixture);
  Mat W = read_matrix(d.file("a/W.txt")), Z = read_matrix(d.file("a/Z.txt"));
  double mse = masked_mse(A, W * Z);
  CHECK(std::abs(mse - std::stod(man.at("result.final_mse"))) <= 1e-10);

  // The manifest alone reproduces the run.
  REQUIRE(cli("fit --config " + d.file("a/manifest.txt") + " --out " + d.file("c"), d.file("log")) == 0);
  CHECK(read_text(d.file("a/trace.csv")) == read_text(d.file("c/trace.csv")));
  CHECK(read_text(d.file("a/W.txt")) == read_text(d.file("c/W.txt")));
  CHECK(read_text(d.file("a/manifest.txt")) == read_text(d.file("c/manifest.txt")));

  REQUIRE(cli("evaluate --input " + kFixture + " --factors " + d.file("a") + " --out " + d.file("e"),
              d.file("elog")) == 0);
  CHECK(read_text(d.file("elog")).find("mse=") != std::string::npos);

  REQUIRE(cli("export-plot-data --input " + d.file("a") + " --out " + d.file("p") + " --burn-in 30",
              d.file("log")) == 0);
  std::string conv = read_text(d.file("p/convergence.csv"));
  CHECK(conv.rfind("iteration,mse,running_mean\n", 0) == 0);
  CHECK(std::count(conv.begin(), conv.end(), '\n') == 61);
  CHECK(read_text(d.file("p/autocorr.csv")).rfind("lag,acf\n", 0) == 0);
}

TEST_CASE("ARD selection run is internally consistent") {
  TempDir d;
  REQUIRE(cli("id-select --model gbt --ard --iters 60 --burn-in 30 --seed 3 --input " + kFixture +
                  " --out " + d.file("id"),
              d.file("log")) == 0);
  auto sel = nlohmann::json::parse(read_text(d.file("id/selected.json")));
  auto man = read_key_values(d.file("id/manifest.txt"));
  REQUIRE(sel.is_array());
  CHECK(std::to_string(sel.size()) == man.at("result.n_selected"));
  Mat C = read_matrix(d.file("id/C.txt")), W = read_matrix(d.file("id/W.txt"));
  CHECK(C.cols() == static_cast<Index>(sel.size()));
  double mse = masked_mse(load_dense(kFixture), C * W);
  CHECK(std::abs(mse - std::stod(man.at("result.final_mse"))) <= 1e-10);
}

TEST_CASE("configuration errors") {
  TempDir d;
  std::string base = "fit --k 2 --iters 10 --burn-in 5 --input " + kFixture + " --out " + d.file("o");
  CHECK(cli(base + " --model nosuch", d.file("log")) != 0);
  CHECK(read_text(d.file("log")).find("unknown model") != std::string::npos);
  CHECK(cli(base + " --model ggg --set bogus=1", d.file("log")) != 0);
  std::string msg = read_text(d.file("log"));
  CHECK(msg.find("unknown hyperparameter 'bogus'") != std::string::npos);
  CHECK(msg.find("lambda_w") != std::string::npos);
  CHECK(cli(base + " --model ggg --set lambda_w=0.5", d.file("log")) == 0);
  CHECK(read_key_values(d.file("o/manifest.txt")).at("hyper.lambda_w") == "0.5");

  RunConfig cfg;
  write_text(d.file("bad.cfg"), "model=ggg\ncolour=blue\n");
  CHECK_THROWS_AS(apply_config_file(cfg, d.file("bad.cfg")), ConfigError);
  write_text(d.file("good.cfg"), "# comment\nmodel=gee\nk=4\nhyper.lambda_w=2\n\n");
  apply_config_file(cfg, d.file("good.cfg"));
  CHECK(cfg.model == "gee");
  CHECK(cfg.k == 4);
  CHECK(cfg.hyper.at("lambda_w") == 2.0);
}

TEST_CASE("parallel chains write separate outputs") {
  TempDir d;
  REQUIRE(cli("fit --model gee --k 2 --iters 20 --burn-in 10 --seed 5 --chains 2 --input " + kFixture +
                  " --out " + d.file("ch"),
              d.file("log")) == 0);
  CHECK(fs::exists(d.file("ch/chain_0/trace.csv")));
  CHECK(fs::exists(d.file("ch/chain_1/trace.csv")));
  CHECK(read_text(d.file("ch/chain_0/trace.csv")) != read_text(d.file("ch/chain_1/trace.csv")));
  REQUIRE(cli("fit --model gee --k 2 --iters 20 --burn-in 10 --seed 6 --input " + kFixture + " --out " +
                  d.file("single"),
              d.file("log")) == 0);
  CHECK(read_text(d.file("ch/chain_1/trace.csv")) == read_text(d.file("single/trace.csv")));
}
