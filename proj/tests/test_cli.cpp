#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// Drives the installed binary end to end.  The harness exports
// DUALQ_CLI_PATH (the built executable) and DUALQ_GOLDEN_DIR (fixtures).

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  size_t n = 0;
  while (std::getline(in, line))
    if (!line.empty()) n++;
  return n;
}

// baked in at configure time; the environment can still redirect
const char* cli_path() {
  const char* p = std::getenv("DUALQ_CLI_PATH_OVERRIDE");
  return p != nullptr ? p : DUALQ_CLI_PATH;
}

const char* golden_dir() {
  const char* p = std::getenv("DUALQ_GOLDEN_DIR_OVERRIDE");
  return p != nullptr ? p : DUALQ_GOLDEN_DIR;
}

fs::path work_dir() {
  auto d = fs::temp_directory_path() / "dualq_cli_tests";
  fs::create_directories(d);
  return d;
}

// args are appended verbatim; env_prefix lets a test exercise env-var knobs
CmdResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  auto dir = work_dir();
  auto out_file = dir / ("stdout_" + std::to_string(counter) + ".txt");
  auto err_file = dir / ("stderr_" + std::to_string(counter) + ".txt");
  counter++;

  std::string cmd = env_prefix + "\"" + std::string(cli_path()) + "\" " + args + " > \"" +
                    out_file.string() + "\" 2> \"" + err_file.string() + "\"";
  int rc = std::system(cmd.c_str());
  CmdResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

// value of a "name   number" row in the estimate table
double table_value(const std::string& text, const std::string& name) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind(name, 0) == 0 && line.size() > name.size() && line[name.size()] == ' ')
      return std::strtod(line.c_str() + name.size(), nullptr);
  }
  FAIL("missing estimate row: " << name);
  return 0.0;
}

}  // namespace

TEST_CASE("version prints and exits cleanly") {
  auto r = run_cli("version");
  CHECK(r.code == 0);
  CHECK(r.out.find("dualq 0.1.0") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cli("").code == 1);                       // a subcommand is required
  CHECK(run_cli("simulate --bogus 1").code == 1);     // unknown flag
  CHECK(run_cli("estimate --mu 2").code == 1);        // missing required --k
  CHECK(run_cli("frobnicate").code == 1);             // unknown subcommand
}

TEST_CASE("estimate prints the closed-form table") {
  auto r = run_cli("estimate --k 10 --mu 2");
  REQUIRE(r.code == 0);
  CHECK(table_value(r.out, "mean_wait") == doctest::Approx(5.0));
  CHECK(table_value(r.out, "jockey_wait_at_k") == doctest::Approx(2.25));
  double renege = table_value(r.out, "renege_probability");
  CHECK(renege >= 0.0);
  CHECK(renege <= 1.0);
  double cdf = table_value(r.out, "wait_cdf_at_patience");
  CHECK(renege == doctest::Approx(1.0 - cdf).epsilon(1e-9));

  auto r2 = run_cli("estimate --k 2 --mu 1 --lambda-tar 0");
  REQUIRE(r2.code == 0);
  CHECK(table_value(r2.out, "jockey_wait_at_k") == doctest::Approx(0.5));

  // an already-exhausted budget cannot be rescued by switching
  auto r3 = run_cli("estimate --k 5 --mu 1 --t-patience 4 --t0 9");
  REQUIRE(r3.code == 0);
  CHECK(table_value(r3.out, "switch_fail") == doctest::Approx(1.0));
  CHECK(table_value(r3.out, "service_within_remaining") == doctest::Approx(0.0));
}

TEST_CASE("estimate rejects an overloaded target queue") {
  auto r = run_cli("estimate --k 5 --mu 2 --lambda-tar 4");
  CHECK(r.code == 1);
  CHECK(r.err.find("must be below") != std::string::npos);
}

TEST_CASE("estimate csv output matches the golden fixture byte for byte") {
  auto csv = work_dir() / "estimate_out.csv";
  fs::remove(csv);
  auto r = run_cli("estimate --k 10 --mu 2 --t-patience 4 --t0 1 --lambda-tar 1 --t 0.5 --csv \"" +
                   csv.string() + "\"");
  REQUIRE(r.code == 0);
  auto got = slurp(csv);
  auto want = slurp(fs::path(golden_dir()) / "estimate.csv");
  REQUIRE(!want.empty());
  CHECK(got == want);
}

TEST_CASE("simulate writes the documented files and is seed-deterministic") {
  auto d1 = work_dir() / "sim1";
  auto d2 = work_dir() / "sim2";
  fs::remove_all(d1);
  fs::remove_all(d2);

  std::string args = "simulate --lambda 5 --feed markov --reps 2 --horizon 20 --warmup 5 "
                     "--seed 42 --out ";
  REQUIRE(run_cli(args + "\"" + d1.string() + "\"").code == 0);
  REQUIRE(run_cli(args + "\"" + d2.string() + "\"").code == 0);

  auto m1 = slurp(d1 / "metrics.csv");
  REQUIRE(!m1.empty());
  CHECK(m1 == slurp(d2 / "metrics.csv"));
  CHECK(slurp(d1 / "curves.csv") == slurp(d2 / "curves.csv"));

  // schema line, header, one row per (lambda, rep)
  std::istringstream is(m1);
  std::string line;
  std::getline(is, line);
  CHECK(line == "# dualq-csv-schema: metrics/v1");
  std::getline(is, line);
  CHECK(line.rfind("feed,lambda,delta,rep,admitted", 0) == 0);
  CHECK(count_lines(d1 / "metrics.csv") == 4);

  auto curves = slurp(d1 / "curves.csv");
  CHECK(curves.find("# dualq-csv-schema: curves/v1") == 0);
  CHECK(curves.find("feed,lambda,queue_size,reviews,reneges,jockeys,renege_rate,jockey_rate") !=
        std::string::npos);
}

TEST_CASE("simulate optional outputs: time series and event trace") {
  auto d = work_dir() / "sim_extras";
  fs::remove_all(d);
  auto r = run_cli("simulate --lambda 5 --feed markov baseline --reps 1 --horizon 10 "
                   "--warmup 2 --timeseries 2 --trace --seed 7 --out \"" +
                   d.string() + "\"");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(d / "timeseries.csv"));
  CHECK(fs::exists(d / "trace_markov.csv"));
  CHECK(fs::exists(d / "trace_baseline.csv"));
  CHECK(count_lines(d / "timeseries.csv") > 2);

  // both feeds appear in the shared tables
  auto metrics = slurp(d / "metrics.csv");
  CHECK(metrics.find("markov,") != std::string::npos);
  CHECK(metrics.find("baseline,") != std::string::npos);
}

TEST_CASE("the out directory can come from the environment") {
  auto d = work_dir() / "sim_env";
  fs::remove_all(d);
  auto r = run_cli("simulate --lambda 5 --feed markov --reps 1 --horizon 10 --warmup 2 --seed 1",
                   "DUALQ_OUT_DIR=\"" + d.string() + "\" ");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(d / "metrics.csv"));
}

TEST_CASE("config files feed flags, with the command line taking precedence") {
  auto d = work_dir() / "sim_cfg";
  auto d2 = work_dir() / "sim_cfg2";
  fs::remove_all(d);
  fs::remove_all(d2);
  auto cfg_path = work_dir() / "sim.ini";
  {
    std::ofstream cfg(cfg_path);
    cfg << "[simulate]\n"
        << "lambda=5\n"
        << "reps=1\n"
        << "horizon=10\n"
        << "warmup=2\n"
        << "seed=3\n"
        << "out=\"" << d.string() << "\"\n";
  }
  auto r = run_cli("--config \"" + cfg_path.string() + "\" simulate");
  REQUIRE(r.code == 0);
  CHECK(count_lines(d / "metrics.csv") == 3);  // schema + header + 1 rep

  auto r2 = run_cli("--config \"" + cfg_path.string() + "\" simulate --reps 2 --out \"" +
                    d2.string() + "\"");
  REQUIRE(r2.code == 0);
  CHECK(count_lines(d2 / "metrics.csv") == 4);  // the flag overrode the file
}

TEST_CASE("training writes checkpoint and loss history; resume extends them") {
  auto d1 = work_dir() / "train1";
  auto d2 = work_dir() / "train2";
  fs::remove_all(d1);
  fs::remove_all(d2);

  auto r = run_cli("train --episodes 3 --epochs 5 --hidden 8 --seed 7 --out \"" + d1.string() +
                   "\"");
  REQUIRE(r.code == 0);
  REQUIRE(fs::exists(d1 / "checkpoint.json"));
  REQUIRE(fs::exists(d1 / "loss.csv"));
  CHECK(count_lines(d1 / "loss.csv") == 5);  // schema + header + 3 episodes

  auto r2 = run_cli("train --resume \"" + (d1 / "checkpoint.json").string() +
                    "\" --episodes 2 --out \"" + d2.string() + "\"");
  REQUIRE(r2.code == 0);
  CHECK(count_lines(d2 / "loss.csv") == 7);  // history carries over: 5 episodes now

  // episode numbering continues without a break
  auto loss = slurp(d2 / "loss.csv");
  CHECK(loss.find("\n5,") != std::string::npos);
  CHECK(loss.find("\n6,") == std::string::npos);
}

TEST_CASE("train --check refuses a history too short to judge") {
  auto d = work_dir() / "train_short";
  fs::remove_all(d);
  auto r = run_cli("train --episodes 5 --epochs 5 --hidden 8 --seed 7 --check --out \"" +
                   d.string() + "\"");
  CHECK(r.code == 2);
  CHECK(r.err.find("at least 30") != std::string::npos);
}

TEST_CASE("asymptotics: the closed form passes, the zero estimator fails") {
  auto d1 = work_dir() / "asym_markov";
  auto d2 = work_dir() / "asym_zero";
  fs::remove_all(d1);
  fs::remove_all(d2);
  std::string common = " --grid 1 4 16 --sweep-reps 100 --profile-reps 80 "
                       "--agreement-reps 20 --chernoff-reps 2000 --seed 5 --out ";

  auto good = run_cli("asymptotics --feed markov" + common + "\"" + d1.string() + "\"");
  CHECK(good.code == 0);
  CHECK(good.out.find("[PASS] backlog_sweep") != std::string::npos);
  CHECK(good.out.find("[PASS] sublinear_error") != std::string::npos);
  CHECK(good.out.find("[PASS] decision_agreement") != std::string::npos);
  CHECK(good.out.find("[PASS] chernoff_bound") != std::string::npos);
  CHECK(fs::exists(d1 / "report.json"));
  CHECK(fs::exists(d1 / "sweep.csv"));
  CHECK(fs::exists(d1 / "profile.csv"));
  CHECK(fs::exists(d1 / "agreement.csv"));
  CHECK(fs::exists(d1 / "chernoff.csv"));

  auto bad = run_cli("asymptotics --feed debug-zero" + common + "\"" + d2.string() + "\"");
  CHECK(bad.code == 2);
  CHECK(bad.out.find("[FAIL] sublinear_error") != std::string::npos);
}
