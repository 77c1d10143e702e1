// Drives the installed CLI binary end to end; the binary path arrives as
// argv[1] from ctest.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "survode/data.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;

int run_cli(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " > /dev/null 2> /dev/null";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("survode_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

const char* kSimulateConfig = R"({
  "simulate": {"scenario": "hazard_response_4cov", "n": 150, "seed": 42,
                "target_censoring": 0.2, "grid_step": 0.01, "t_max": 20.0}
})";

const char* kLogisticData =
    "time,status,trt\n"
    "0.8,1,0\n1.2,1,1\n2.5,0,0\n0.4,1,1\n3.1,1,0\n1.9,0,1\n2.2,1,0\n0.6,1,1\n"
    "1.4,1,0\n2.8,0,1\n0.9,1,0\n1.1,1,1\n2.0,1,0\n1.7,0,1\n0.5,1,0\n1.3,1,1\n"
    "2.6,1,0\n0.7,0,1\n1.8,1,0\n2.4,1,1\n";

const char* kFitConfig = R"({
  "model": {"family": "logistic",
             "formulas": {"lambda": ["trt"], "kappa": ["trt"]},
             "h0_mode": "free", "max_time": 10.0},
  "priors": {"intercept_sd": 10.0, "coef_prior": "normal",
              "h0_gamma": {"shape": 2.0, "rate": 0.5}},
  "optimizer": {"restarts": 1},
  "fit": {"seed": 7, "normal_draws": 300}
})";

}  // namespace

TEST_CASE("simulate artifacts are byte-identical across runs") {
  TempDir tmp("sim");
  write_file(tmp.path / "cfg.json", kSimulateConfig);
  for (const char* sub : {"a", "b"}) {
    fs::create_directories(tmp.path / sub);
    const int rc = run_cli("--config " + (tmp.path / "cfg.json").string() + " --out " +
                           (tmp.path / sub).string() + " simulate");
    REQUIRE(rc == 0);
  }
  const std::string a = slurp(tmp.path / "a" / "dataset.csv");
  const std::string b = slurp(tmp.path / "b" / "dataset.csv");
  CHECK(a == b);
  CHECK(a.find("# config_hash=") != std::string::npos);
  CHECK(a.find("# version=") != std::string::npos);
  // the emitted dataset is re-ingestable
  const auto d = survode::ingest_csv((tmp.path / "a" / "dataset.csv").string());
  CHECK(d.n() == 150);
  CHECK(d.column_names == std::vector<std::string>{"x1", "x2", "x3", "x4"});
}

TEST_CASE("fit writes a structured document plus draws, deterministically") {
  TempDir tmp("fit");
  write_file(tmp.path / "data.csv", kLogisticData);
  write_file(tmp.path / "cfg.json", kFitConfig);
  for (const char* sub : {"a", "b"}) {
    fs::create_directories(tmp.path / sub);
    const int rc = run_cli("--config " + (tmp.path / "cfg.json").string() + " --data " +
                           (tmp.path / "data.csv").string() + " --out " +
                           (tmp.path / sub).string() + " fit");
    REQUIRE(rc == 0);
  }
  CHECK(slurp(tmp.path / "a" / "fit.json") == slurp(tmp.path / "b" / "fit.json"));
  CHECK(slurp(tmp.path / "a" / "normal_draws.csv") ==
        slurp(tmp.path / "b" / "normal_draws.csv"));
  const std::string fit = slurp(tmp.path / "a" / "fit.json");
  CHECK(fit.find("\"aic\"") != std::string::npos);
  CHECK(fit.find("\"log_evidence\"") != std::string::npos);
  CHECK(fit.find("\"hessian\"") != std::string::npos);
  CHECK(fit.find("log_h0") != std::string::npos);

  SUBCASE("compare consumes fit documents") {
    const std::string cmp_cfg = std::string(R"({"compare": {"fits": [)") +
                                R"({"label": "logistic", "path": ")" +
                                (tmp.path / "a" / "fit.json").string() + R"("}]}})";
    write_file(tmp.path / "cmp.json", cmp_cfg);
    const int rc = run_cli("--config " + (tmp.path / "cmp.json").string() + " --out " +
                           tmp.path.string() + " compare");
    REQUIRE(rc == 0);
    const std::string table = slurp(tmp.path / "compare.csv");
    CHECK(table.find("logistic,5,") != std::string::npos);
  }

  SUBCASE("predict emits survival starting at one") {
    const std::string pred_cfg = std::string(R"({
      "model": {"family": "logistic",
                 "formulas": {"lambda": ["trt"], "kappa": ["trt"]},
                 "h0_mode": "free", "max_time": 10.0},
      "predict": {"seed": 3, "draws": ")") +
                                 (tmp.path / "a" / "normal_draws.csv").string() +
                                 R"(", "t_max": 5.0, "grid_points": 11,
      "profiles": [{"trt": 0}, {"trt": 1}]}})";
    write_file(tmp.path / "pred.json", pred_cfg);
    const int rc = run_cli("--config " + (tmp.path / "pred.json").string() + " --data " +
                           (tmp.path / "data.csv").string() + " --out " + tmp.path.string() +
                           " predict");
    REQUIRE(rc == 0);
    REQUIRE(fs::exists(tmp.path / "curves_profile1.csv"));
    REQUIRE(fs::exists(tmp.path / "attractors.json"));
    const std::string curves = slurp(tmp.path / "curves_profile0.csv");
    CHECK(curves.find("\n0,1,1,1,survival") != std::string::npos);  // S(0) = 1 exactly
  }
}

TEST_CASE("validation failures exit with code 2") {
  TempDir tmp("bad");
  write_file(tmp.path / "bad.csv", "time,status\n1,2\n");
  write_file(tmp.path / "cfg.json", kFitConfig);
  CHECK(run_cli("--config " + (tmp.path / "cfg.json").string() + " --data " +
                (tmp.path / "bad.csv").string() + " --out " + tmp.path.string() + " fit") == 2);
  // unknown covariate in the formulas
  write_file(tmp.path / "data.csv", "time,status,x\n1,1,0\n2,0,1\n");
  CHECK(run_cli("--config " + (tmp.path / "cfg.json").string() + " --data " +
                (tmp.path / "data.csv").string() + " --out " + tmp.path.string() + " fit") == 2);
  // missing seed
  write_file(tmp.path / "noseed.json", R"({
    "model": {"family": "logistic", "formulas": {"lambda": ["trt"], "kappa": []},
               "max_time": 10.0, "h0": 0.1},
    "fit": {}
  })");
  write_file(tmp.path / "trt.csv", "time,status,trt\n1,1,0\n2,0,1\n");
  CHECK(run_cli("--config " + (tmp.path / "noseed.json").string() + " --data " +
                (tmp.path / "trt.csv").string() + " --out " + tmp.path.string() + " fit") == 2);
}

TEST_CASE("curve csv columns match the documented schema") {
  // covered structurally above; here check the header line verbatim
  TempDir tmp("hdr");
  write_file(tmp.path / "data.csv", kLogisticData);
  write_file(tmp.path / "cfg.json", kFitConfig);
  REQUIRE(run_cli("--config " + (tmp.path / "cfg.json").string() + " --data " +
                  (tmp.path / "data.csv").string() + " --out " + tmp.path.string() +
                  " fit") == 0);
  const std::string pred_cfg = std::string(R"({
    "model": {"family": "logistic",
               "formulas": {"lambda": ["trt"], "kappa": ["trt"]},
               "h0_mode": "free", "max_time": 10.0},
    "predict": {"seed": 3, "draws": ")") +
                               (tmp.path / "normal_draws.csv").string() +
                               R"(", "t_max": 5.0, "grid_points": 5,
    "profiles": [{"trt": 0}]}})";
  write_file(tmp.path / "pred.json", pred_cfg);
  REQUIRE(run_cli("--config " + (tmp.path / "pred.json").string() + " --data " +
                  (tmp.path / "data.csv").string() + " --out " + tmp.path.string() +
                  " predict") == 0);
  const std::string curves = slurp(tmp.path / "curves_profile0.csv");
  CHECK(curves.find("time,mean,lo95,hi95,quantity") != std::string::npos);
  CHECK(curves.find(",hazard\n") != std::string::npos);
  CHECK(curves.find(",survival\n") != std::string::npos);
}

int main(int argc, char** argv) {
  if (argc > 1 && argv[1][0] != '-') g_cli = argv[1];
  if (g_cli.empty()) {
    const char* env = std::getenv("SURVODE_CLI");
    if (env) g_cli = env;
  }
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: test_cli <path-to-survode-binary>\n");
    return 1;
  }
  doctest::Context ctx;
  ctx.applyCommandLine(1, argv);
  return ctx.run();
}
