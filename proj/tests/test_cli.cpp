#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = DIFFEST_CLI_PATH;

struct RunResult {
  int exit_code;
  std::string stdout_text;
};

RunResult run(const std::string& args, const std::string& workdir,
              const std::string& env = "") {
  const std::string out_file = workdir + "/cmd_stdout.txt";
  const std::string cmd = "cd " + workdir + " && " + env + " " + kCli + " " +
                          args + " > " + out_file + " 2> cmd_stderr.txt";
  const int rc = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WEXITSTATUS(rc);
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  res.stdout_text = ss.str();
  return res;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

long count_lines(const std::string& text) {
  long n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("simulate writes a CSV and is deterministic") {
  const std::string dir = fresh_dir("diffest_cli_sim");
  const std::string flags =
      "simulate --model ou_sqrt_theta --theta 1 --steps 1000 --seed 7 --x0 0";
  const RunResult r1 = run(flags + " --out a.csv", dir);
  CHECK(r1.exit_code == 0);
  CHECK(count_lines(slurp(dir + "/a.csv")) == 1002);  // header + 1001 rows
  CHECK(r1.stdout_text.find("final=") != std::string::npos);

  const RunResult r2 = run(flags + " --out b.csv", dir);
  CHECK(r2.exit_code == 0);
  CHECK(slurp(dir + "/a.csv") == slurp(dir + "/b.csv"));

  // Missing --theta is a usage error.
  const RunResult r3 =
      run("simulate --model ou_sqrt_theta --steps 100 --seed 1", dir);
  CHECK(r3.exit_code == 2);

  const RunResult r4 = run("simulate --model nope --theta 1 --steps 10 --seed 1", dir);
  CHECK(r4.exit_code == 2);

  const RunResult r5 = run(flags + " --bogus-flag 3", dir);
  CHECK(r5.exit_code == 2);
}

TEST_CASE("estimate recovers theta on self-simulated data") {
  const std::string dir = fresh_dir("diffest_cli_est");
  const RunResult r = run(
      "estimate --model ou_sqrt_theta --estfun qv --self-sim --theta0 1 "
      "--n 10000 --fine-steps 100000 --seed 11",
      dir);
  CHECK(r.exit_code == 0);
  const auto pos = r.stdout_text.find("\"theta_hat\":");
  REQUIRE(pos != std::string::npos);
  const double theta_hat = std::stod(r.stdout_text.substr(pos + 12));
  CHECK(std::fabs(theta_hat - 1.0) < 0.1);
  CHECK(r.stdout_text.find("\"status\":\"converged\"") != std::string::npos);

  // Interval excluding the root.
  const RunResult r2 = run(
      "estimate --model ou_sqrt_theta --estfun qv --self-sim --theta0 1 "
      "--n 1000 --fine-steps 10000 --seed 11 --lo 1.7 --hi 1.99",
      dir);
  CHECK(r2.exit_code == 4);
  CHECK(r2.stdout_text.find("\"status\":\"no_root\"") != std::string::npos);

  // Catalog guard: sec4_g needs the (theta+x^2)^-1 diffusion shape.
  const RunResult r3 = run(
      "estimate --model ou_sqrt_theta --estfun sec4_g --self-sim --theta0 1 "
      "--n 100 --fine-steps 1000 --seed 3",
      dir);
  CHECK(r3.exit_code == 2);
}

TEST_CASE("estimate reads data written by simulate") {
  const std::string dir = fresh_dir("diffest_cli_pipe");
  CHECK(run("simulate --model ergodic_sec4 --theta 1 --steps 100000 --seed 5 "
            "--x0 0 --out path.csv",
            dir)
            .exit_code == 0);
  const RunResult r = run(
      "estimate --model ergodic_sec4 --estfun sec4_g --data path.csv "
      "--subsample 1000",
      dir);
  CHECK(r.exit_code == 0);
  const auto pos = r.stdout_text.find("\"theta_hat\":");
  REQUIRE(pos != std::string::npos);
  CHECK(std::fabs(std::stod(r.stdout_text.substr(pos + 12)) - 1.0) < 0.5);
}

TEST_CASE("check classifies the sec4 catalog functions") {
  const std::string dir = fresh_dir("diffest_cli_check");
  const RunResult good = run("check --model ergodic_sec4 --estfun sec4_g --json", dir);
  CHECK(good.exit_code == 0);
  CHECK(good.stdout_text.find("\"verdict\": \"efficient\"") != std::string::npos);

  const RunResult bad = run("check --model ergodic_sec4 --estfun sec4_h --json", dir);
  CHECK(bad.exit_code == 5);
  CHECK(bad.stdout_text.find("\"verdict\": \"not_efficient\"") != std::string::npos);

  const RunResult mc = run(
      "check --model ou_sqrt_theta --estfun ou_exact --mc --mc-reps 5000 --json",
      dir);
  CHECK(mc.exit_code == 0);
  CHECK(mc.stdout_text.find("all_censored") != std::string::npos);
}

TEST_CASE("study runs from a config file and respects overrides") {
  const std::string dir = fresh_dir("diffest_cli_study");
  {
    std::ofstream cfg(dir + "/tiny.cfg");
    cfg << "model=ergodic_sec4\n"
           "estfun=sec4_g,sec4_h\n"
           "theta0=1\n"
           "x0=0\n"
           "n_list=100\n"
           "replicates=6\n"
           "fine_steps=2000\n"
           "base_seed=99\n"
           "output_dir=out\n";
  }
  const RunResult r1 = run("study --config tiny.cfg --workers 1", dir);
  CHECK(r1.exit_code == 0);
  CHECK(r1.stdout_text.find("replicates.csv") != std::string::npos);
  const std::string csv1 = slurp(dir + "/out/replicates.csv");
  CHECK(count_lines(csv1) == 1 + 6 * 2);

  const RunResult r2 = run("study --config tiny.cfg --workers 2 --out out2", dir);
  CHECK(r2.exit_code == 0);
  CHECK(slurp(dir + "/out2/replicates.csv") == csv1);

  // Seed override through the environment changes the data.
  const RunResult r3 =
      run("study --config tiny.cfg --workers 1 --out out3", dir, "DIFFEST_SEED=123");
  CHECK(r3.exit_code == 0);
  CHECK(slurp(dir + "/out3/replicates.csv") != csv1);

  // Config errors exit 2.
  {
    std::ofstream cfg(dir + "/bad.cfg");
    cfg << "model=ergodic_sec4\nestfun=sec4_g\nn_list=300\nfine_steps=2000\n"
           "replicates=2\n";
  }
  CHECK(run("study --config bad.cfg", dir).exit_code == 2);
  {
    std::ofstream cfg(dir + "/unknown.cfg");
    cfg << "model=ergodic_sec4\nestfun=sec4_g\nnot_a_key=1\n";
  }
  CHECK(run("study --config unknown.cfg", dir).exit_code == 2);
}

TEST_CASE("summarize reproduces the study summary byte for byte") {
  const std::string dir = fresh_dir("diffest_cli_summ");
  {
    std::ofstream cfg(dir + "/tiny.cfg");
    cfg << "model=ou_sqrt_theta\n"
           "estfun=qv,ou_exact\n"
           "theta0=1\n"
           "n_list=100,1000\n"
           "replicates=10\n"
           "fine_steps=10000\n"
           "base_seed=2024\n"
           "output_dir=out\n";
  }
  CHECK(run("study --config tiny.cfg --workers 2", dir).exit_code == 0);
  const RunResult r = run(
      "summarize --replicates out/replicates.csv --theta0 1 --out resummary.json",
      dir);
  CHECK(r.exit_code == 0);
  CHECK(slurp(dir + "/resummary.json") == slurp(dir + "/out/summary.json"));
}
