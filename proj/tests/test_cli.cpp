#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "pst/csv.hpp"
#include "pst/report.hpp"
#include "pst/simulate.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRunner {
  fs::path dir;

  CliRunner() {
    dir = fs::temp_directory_path() /
          ("pst_cli_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter()++));
    fs::create_directories(dir);
  }
  ~CliRunner() { fs::remove_all(dir); }

  static int& counter() {
    static int value = 0;
    return value;
  }

  int run(const std::string& args, const std::string& env = "") const {
    const std::string command = env + (env.empty() ? "" : " ") + PST_CLI_PATH +
                                " " + args + " > " +
                                (dir / "stdout.txt").string() + " 2> " +
                                (dir / "stderr.txt").string();
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read_file(const fs::path& path) const {
    std::ifstream file(path, std::ios::binary);
    std::ostringstream body;
    body << file.rdbuf();
    return body.str();
  }

  std::string stderr_text() const { return read_file(dir / "stderr.txt"); }

  json read_json(const fs::path& path) const {
    return json::parse(read_file(path));
  }
};

void write_fixture(const CliRunner& runner, pst::Family family, int n, int p,
                   std::uint64_t seed) {
  const pst::Dataset data = test_support::random_dataset(family, n, 2, p, seed);
  pst::io::write_matrix_csv((runner.dir / "y.csv").string(), {"y"}, data.y);
  std::vector<std::string> g_names;
  for (int j = 0; j < p; ++j) g_names.push_back("g" + std::to_string(j + 1));
  pst::io::write_matrix_csv((runner.dir / "g.csv").string(), g_names, data.g);
  pst::io::write_matrix_csv((runner.dir / "x.csv").string(), {"intercept", "z"},
                            data.x);
}

std::string data_args(const CliRunner& runner, const std::string& family) {
  return "--y " + (runner.dir / "y.csv").string() + " --g " +
         (runner.dir / "g.csv").string() + " --x " +
         (runner.dir / "x.csv").string() + " --family " + family;
}

}  // namespace

TEST_CASE("test command fills defaults and writes the report schema") {
  CliRunner runner;
  write_fixture(runner, pst::Family::binomial, 60, 8, 901);
  const fs::path out = runner.dir / "out";
  const int code = runner.run("test " + data_args(runner, "binomial") +
                              " --basis pca --r 3 --seed 5 --out " +
                              out.string());
  CHECK(code == 0);

  const json report = runner.read_json(out / "result.json");
  CHECK(report["schema_version"] == 1);
  CHECK(report["method"] == "chi2_asymptotic");
  CHECK(report["df"] == 3);
  CHECK(report["basis"]["kind"] == "pca");
  CHECK(report.contains("statistic"));
  CHECK(report.contains("p_value"));
  CHECK(report["n"] == 60);

  const std::string config = runner.read_file(out / "config_used.cfg");
  CHECK(config.find("alpha = 0.05") != std::string::npos);
  CHECK(config.find("b = 10000") != std::string::npos);
  CHECK(config.find("seed = 5") != std::string::npos);
}

TEST_CASE("a missing seed is generated and recorded") {
  CliRunner runner;
  write_fixture(runner, pst::Family::gaussian, 40, 5, 903);
  const fs::path out = runner.dir / "out";
  const int code = runner.run("test " + data_args(runner, "gaussian") +
                              " --r 2 --out " + out.string());
  CHECK(code == 0);
  const std::string config = runner.read_file(out / "config_used.cfg");
  CHECK(config.find("seed = ") != std::string::npos);
}

TEST_CASE("overlapping partition files are rejected with indices") {
  CliRunner runner;
  write_fixture(runner, pst::Family::gaussian, 40, 5, 907);
  std::ofstream partition(runner.dir / "partition.csv");
  partition << "index,group\n1,1\n2,1\n2,2\n3,2\n";
  partition.close();
  const int code = runner.run(
      "test " + data_args(runner, "gaussian") + " --basis partition " +
      "--partition-file " + (runner.dir / "partition.csv").string() +
      " --out " + (runner.dir / "out").string());
  CHECK(code == 2);
  CHECK(runner.stderr_text().find("index 2") != std::string::npos);
}

TEST_CASE("r at or above n - m is rejected") {
  CliRunner runner;
  write_fixture(runner, pst::Family::gaussian, 10, 9, 911);
  const int code = runner.run("test " + data_args(runner, "gaussian") +
                              " --r 8 --out " + (runner.dir / "out").string());
  CHECK(code == 2);
  CHECK(runner.stderr_text().find("n - m") != std::string::npos);
}

TEST_CASE("dimension mismatches name the offending files") {
  CliRunner runner;
  write_fixture(runner, pst::Family::gaussian, 30, 4, 913);
  // outcome with the wrong number of rows
  pst::rng::Stream stream(917, 0);
  pst::io::write_matrix_csv((runner.dir / "y.csv").string(), {"y"},
                            test_support::random_vector(stream, 20));
  const int code = runner.run("test " + data_args(runner, "gaussian") +
                              " --r 2 --out " + (runner.dir / "out").string());
  CHECK(code == 2);
  const std::string message = runner.stderr_text();
  CHECK(message.find("y.csv") != std::string::npos);
  CHECK(message.find("20") != std::string::npos);
  CHECK(message.find("30") != std::string::npos);
}

TEST_CASE("posthoc emits one monotone row per location") {
  CliRunner runner;
  write_fixture(runner, pst::Family::binomial, 80, 12, 919);
  const fs::path out = runner.dir / "out";
  const int code = runner.run("posthoc " + data_args(runner, "binomial") +
                              " --r 4 --b 2000 --seed 17 --out " +
                              out.string());
  CHECK(code == 0);
  const Eigen::MatrixXd table =
      pst::io::read_numeric_csv((out / "posthoc.csv").string());
  REQUIRE(table.rows() == 12);
  REQUIRE(table.cols() == 5);
  const double threshold =
      runner.read_json(out / "posthoc.json")["threshold_c"].get<double>();
  for (int a = 0; a < 12; ++a) {
    for (int b = 0; b < 12; ++b) {
      if (std::abs(table(a, 2)) > std::abs(table(b, 2))) {
        CHECK(table(a, 3) <= table(b, 3));
      }
    }
    CHECK((table(a, 4) != 0.0) == (std::abs(table(a, 2)) > threshold));
  }
}

TEST_CASE("reruns with one seed are byte-identical at any thread count") {
  CliRunner runner;
  write_fixture(runner, pst::Family::binomial, 60, 10, 929);
  const std::string args = "posthoc " + data_args(runner, "binomial") +
                           " --r 3 --b 2000 --seed 23 --out ";
  const fs::path out1 = runner.dir / "run1";
  const fs::path out2 = runner.dir / "run2";
  CHECK(runner.run(args + out1.string(), "PST_THREADS=1") == 0);
  CHECK(runner.run(args + out2.string(), "PST_THREADS=4") == 0);
  for (const std::string name :
       {"result.json", "posthoc.csv", "posthoc.json", "config_used.cfg"}) {
    CHECK(runner.read_file(out1 / name) == runner.read_file(out2 / name));
  }
}

TEST_CASE("numerical failures exit with code 3") {
  CliRunner runner;
  // y lies exactly in col(X): the gaussian null fit is perfect and the
  // information collapses
  pst::Dataset data = test_support::random_dataset(pst::Family::gaussian, 25,
                                                   2, 4, 931);
  data.y = 2.0 * data.x.col(0) - 0.5 * data.x.col(1);
  pst::io::write_matrix_csv((runner.dir / "y.csv").string(), {"y"}, data.y);
  pst::io::write_matrix_csv((runner.dir / "g.csv").string(),
                            {"g1", "g2", "g3", "g4"}, data.g);
  pst::io::write_matrix_csv((runner.dir / "x.csv").string(),
                            {"intercept", "z"}, data.x);
  const int code = runner.run("test " + data_args(runner, "gaussian") +
                              " --r 2 --out " + (runner.dir / "out").string());
  CHECK(code == 3);
}

TEST_CASE("config files resolve defaults and flags override them") {
  CliRunner runner;
  write_fixture(runner, pst::Family::gaussian, 50, 8, 937);
  std::ofstream config(runner.dir / "run.cfg");
  config << "r = 3\nalpha = 0.1\nseed = 41\n";
  config.close();

  const fs::path out1 = runner.dir / "out1";
  CHECK(runner.run("test " + data_args(runner, "gaussian") + " --config " +
                   (runner.dir / "run.cfg").string() + " --out " +
                   out1.string()) == 0);
  CHECK(runner.read_json(out1 / "result.json")["df"] == 3);

  const fs::path out2 = runner.dir / "out2";
  CHECK(runner.run("test " + data_args(runner, "gaussian") + " --config " +
                   (runner.dir / "run.cfg").string() + " --r 5 --out " +
                   out2.string()) == 0);
  CHECK(runner.read_json(out2 / "result.json")["df"] == 5);
}

TEST_CASE("unknown config keys are rejected") {
  CliRunner runner;
  write_fixture(runner, pst::Family::gaussian, 50, 8, 941);
  std::ofstream config(runner.dir / "run.cfg");
  config << "r = 3\nri = 4\n";
  config.close();
  const int code = runner.run("test " + data_args(runner, "gaussian") +
                              " --config " + (runner.dir / "run.cfg").string() +
                              " --out " + (runner.dir / "out").string());
  CHECK(code == 2);
}

TEST_CASE("tiny p-values are reported as the interval sentinel") {
  CHECK(pst::report::p_value_field(1e-310) == json("<1e-300"));
  CHECK(pst::report::p_value_field(0.25) == json(0.25));
  CHECK(pst::report::p_value_field(0.0) == json("<1e-300"));

  CliRunner runner;
  // strong association: the chi-squared statistic lands around n
  pst::rng::Stream stream(947, 0);
  const int n = 2000;
  Eigen::MatrixXd g = test_support::random_matrix(stream, n, 2);
  Eigen::VectorXd y = 3.0 * g.col(0);
  for (int i = 0; i < n; ++i) y[i] += 0.05 * stream.next_normal();
  pst::io::write_matrix_csv((runner.dir / "y.csv").string(), {"y"}, y);
  pst::io::write_matrix_csv((runner.dir / "g.csv").string(), {"g1", "g2"}, g);
  const fs::path out = runner.dir / "out";
  CHECK(runner.run("test --y " + (runner.dir / "y.csv").string() + " --g " +
                   (runner.dir / "g.csv").string() +
                   " --family gaussian --r 2 --seed 3 --out " +
                   out.string()) == 0);
  CHECK(runner.read_json(out / "result.json")["p_value"] == json("<1e-300"));
}

TEST_CASE("exact and adaptive commands produce their reports") {
  CliRunner runner;
  write_fixture(runner, pst::Family::gaussian, 60, 10, 953);
  const fs::path exact_out = runner.dir / "exact";
  CHECK(runner.run("exact " + data_args(runner, "gaussian") +
                   " --r 4 --seed 2 --out " + exact_out.string()) == 0);
  CHECK(runner.read_json(exact_out / "result.json")["method"] ==
        "exact_normal");

  const fs::path adaptive_out = runner.dir / "adaptive";
  CHECK(runner.run("adaptive " + data_args(runner, "gaussian") +
                   " --seed 2 --b 1000 --posthoc --out " +
                   adaptive_out.string()) == 0);
  const json report = runner.read_json(adaptive_out / "result.json");
  CHECK(report["method"] == "adaptive_pca");
  CHECK(report.contains("steps"));
  CHECK(std::abs(report["alpha_star"].get<double>() - 1.0 / 21.0) < 1e-12);
  CHECK(fs::exists(adaptive_out / "posthoc.csv"));
}

TEST_CASE("simulate matches a direct library run under the same scenario") {
  CliRunner runner;
  std::ofstream scenario(runner.dir / "scenario.cfg");
  scenario << "n = 60\np = 12\nreplicates = 15\nseed = 99\nbetas = 0,0.2\n"
              "neg_start = 1\nneg_size = 3\nneg_kind = ar1\nneg_rho = 0.5\n"
              "pos_start = 8\npos_size = 2\npos_kind = ar1\npos_rho = 0.5\n"
              "null_kind = identity\nb = 1000\nb_perm = 100\n"
              "calibration_replicates = 20\nmethods = pca:3,spu_inf\n";
  scenario.close();
  const fs::path out = runner.dir / "out";
  CHECK(runner.run("simulate --scenario " +
                   (runner.dir / "scenario.cfg").string() + " --out " +
                   out.string()) == 0);

  pst::sim::Scenario direct;
  direct.n = 60;
  direct.p = 12;
  direct.replicates = 15;
  direct.seed = 99;
  direct.betas = {0, 0.2};
  direct.neg = {0, 3, {pst::sim::CovKind::ar1, 0.5, 1.0}};
  direct.pos = {7, 2, {pst::sim::CovKind::ar1, 0.5, 1.0}};
  direct.null_cov = {pst::sim::CovKind::identity, 0.0, 1.0};
  direct.mc_draws = 1000;
  direct.permutations = 100;
  direct.calibration_replicates = 20;
  const pst::sim::StudyReport report = pst::sim::run_study(
      direct,
      {pst::sim::parse_method("pca:3"), pst::sim::parse_method("spu_inf")});

  std::ifstream table(out / "study.csv");
  std::string line;
  std::getline(table, line);  // header
  std::size_t row = 0;
  while (std::getline(table, line) && row < report.rows.size()) {
    std::stringstream fields(line);
    std::string method, beta, used, failures, reject;
    std::getline(fields, method, ',');
    std::getline(fields, beta, ',');
    std::getline(fields, used, ',');
    std::getline(fields, failures, ',');
    std::getline(fields, reject, ',');
    CHECK(method == report.rows[row].method);
    CHECK(std::stod(beta) == report.rows[row].beta);
    CHECK(std::stoi(used) == report.rows[row].replicates_used);
    CHECK(std::stod(reject) == report.rows[row].reject_rate);
    ++row;
  }
  CHECK(row == report.rows.size());
  CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("unknown scenario keys list the valid schema") {
  CliRunner runner;
  std::ofstream scenario(runner.dir / "scenario.cfg");
  scenario << "n = 60\npp = 12\n";
  scenario.close();
  const int code = runner.run("simulate --scenario " +
                              (runner.dir / "scenario.cfg").string() +
                              " --out " + (runner.dir / "out").string());
  CHECK(code == 2);
  const std::string message = runner.stderr_text();
  CHECK(message.find("unknown key 'pp'") != std::string::npos);
  CHECK(message.find("valid keys") != std::string::npos);
}

TEST_CASE("bundled scenario configs load and run") {
  CliRunner runner;
  for (const std::string name :
       {"desk_null_study.cfg", "desk_power_study.cfg"}) {
    const fs::path out = runner.dir / ("out_" + name);
    const int code = runner.run(
        "simulate --scenario " + std::string(PST_CONFIG_DIR) + "/" + name +
        " --replicates 4 --b 1000 --out " + out.string());
    CHECK(code == 0);
    CHECK(fs::exists(out / "study.csv"));
  }
}

TEST_CASE("refine writes statistics and the transition summary") {
  CliRunner runner;
  const fs::path out = runner.dir / "out";
  CHECK(runner.run("refine --n 20 --grids 16,32,64 --r 2 --replicates 5 "
                   "--seed 7 --out " +
                   out.string()) == 0);
  const json summary = runner.read_json(out / "refine.json");
  CHECK(summary["grid_sizes"].size() == 3);
  CHECK(summary["median_rel_change"].size() == 2);
  const Eigen::MatrixXd stats =
      pst::io::read_numeric_csv((out / "refine.csv").string());
  CHECK(stats.rows() == 5);
  CHECK(stats.cols() == 3);
}

TEST_CASE("weighted-pca and custom bases run through the CLI") {
  CliRunner runner;
  write_fixture(runner, pst::Family::binomial, 70, 9, 955);
  const fs::path out_weighted = runner.dir / "weighted";
  CHECK(runner.run("test " + data_args(runner, "binomial") +
                   " --basis weighted-pca --r 4 --seed 6 --out " +
                   out_weighted.string()) == 0);
  CHECK(runner.read_json(out_weighted / "result.json")["basis"]["kind"] ==
        "weighted_pca");

  // a custom basis file spanning the first three coordinates
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(9, 3);
  raw(0, 0) = raw(1, 1) = raw(2, 2) = 1.0;
  pst::io::write_matrix_csv((runner.dir / "basis.csv").string(),
                            {"b1", "b2", "b3"}, raw);
  const fs::path out_custom = runner.dir / "custom";
  CHECK(runner.run("test " + data_args(runner, "binomial") +
                   " --basis custom --basis-file " +
                   (runner.dir / "basis.csv").string() + " --seed 6 --out " +
                   out_custom.string()) == 0);
  CHECK(runner.read_json(out_custom / "result.json")["df"] == 3);
}

TEST_CASE("center flag matches manually centered predictors") {
  CliRunner runner;
  const pst::Dataset data =
      test_support::random_dataset(pst::Family::gaussian, 40, 2, 6, 957);
  std::vector<std::string> names;
  for (int j = 0; j < 6; ++j) names.push_back("g" + std::to_string(j + 1));
  pst::io::write_matrix_csv((runner.dir / "y.csv").string(), {"y"}, data.y);
  pst::io::write_matrix_csv((runner.dir / "x.csv").string(), {"c0", "c1"},
                            data.x);
  pst::io::write_matrix_csv((runner.dir / "g.csv").string(), names, data.g);
  const Eigen::MatrixXd centered =
      data.g.rowwise() - data.g.colwise().mean();
  pst::io::write_matrix_csv((runner.dir / "gc.csv").string(), names, centered);

  const fs::path out_flag = runner.dir / "flagged";
  const fs::path out_manual = runner.dir / "manual";
  CHECK(runner.run("test " + data_args(runner, "gaussian") +
                   " --center --r 3 --seed 4 --out " + out_flag.string()) == 0);
  CHECK(runner.run("test --y " + (runner.dir / "y.csv").string() + " --x " +
                   (runner.dir / "x.csv").string() + " --g " +
                   (runner.dir / "gc.csv").string() +
                   " --family gaussian --r 3 --seed 4 --out " +
                   out_manual.string()) == 0);
  const double a =
      runner.read_json(out_flag / "result.json")["statistic"].get<double>();
  const double b =
      runner.read_json(out_manual / "result.json")["statistic"].get<double>();
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("no-intercept runs against an empty nuisance design") {
  CliRunner runner;
  write_fixture(runner, pst::Family::gaussian, 30, 5, 961);
  const fs::path out = runner.dir / "out";
  CHECK(runner.run("test --y " + (runner.dir / "y.csv").string() + " --g " +
                   (runner.dir / "g.csv").string() +
                   " --family gaussian --no-intercept --r 2 --seed 9 --out " +
                   out.string()) == 0);
  CHECK(runner.read_json(out / "result.json")["m"] == 0);
}

TEST_CASE("help exits cleanly") {
  CliRunner runner;
  CHECK(runner.run("--help") == 0);
  CHECK(runner.run("test --help") == 0);
}
