#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fedhybrid/experiment.hpp"

namespace fs = std::filesystem;
using namespace fedhybrid;

namespace {

const fs::path kWork = fs::current_path() / "cli_work";

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << text;
  return p;
}

Outcome cli(const std::string& args, const std::string& env = "") {
  fs::create_directories(kWork);
  const fs::path out = kWork / "stdout.txt";
  const fs::path err = kWork / "stderr.txt";
  const std::string cmd = env + " \"" FEDHYBRID_CLI "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

const std::string kSmall =
    "problem.kind = linreg\n"
    "problem.n = 4\n"
    "problem.d = 3\n"
    "problem.mu = 2\n"
    "run.iters = 20\n"
    "run.seed = 3\n"
    "methods = fedh-g, fedh-n, fedavg\n";

}  // namespace

TEST_CASE("parse_config and apply_setting") {
  const auto c = parse_config(
      "# comment\n"
      "problem.kind = logreg\n\n"
      "problem.n = 6   # trailing\n"
      "clients.newton = [1, 3]\n"
      "methods = fedh-g, mm\n");
  CHECK(c.kind == "logreg");
  CHECK(c.n == 6);
  CHECK(c.newton == std::vector<std::size_t>{1, 3});
  CHECK(c.methods == std::vector<std::string>{"fedh-g", "mm"});
  CHECK(c.mu == 9.0);

  ExperimentConfig e;
  try {
    apply_setting(e, "stepsizee", "1");
    FAIL("expected ConfigError");
  } catch (const ConfigError& err) {
    CHECK(err.key() == "stepsizee");
  }
  CHECK_THROWS_AS(apply_setting(e, "problem.n", "abc"), ConfigError);
  CHECK_THROWS_AS(apply_setting(e, "problem.kind", "svm"), ConfigError);
  CHECK_THROWS_AS(parse_config("problem.n 4\n"), ConfigError);

  bool found = false;
  for (const auto& [k, v] : c.resolved()) found |= k == "problem.n" && v == "6";
  CHECK(found);
}

TEST_CASE("resolve_method names") {
  ExperimentConfig c;
  c.newton = {2, 4};
  CHECK(resolve_method("fedh", c, 5).kinds ==
        kinds_with_newton(5, {1, 3}));
  CHECK(resolve_method("fedh-n", c, 3).kinds == kinds_with_newton(3, {0, 1, 2}));
  CHECK(resolve_method("fedh-g", c, 3).kinds == kinds_with_newton(3, {}));
  CHECK(resolve_method("fedh-2", c, 4).kinds == kinds_with_newton(4, {0, 1}));
  CHECK(resolve_method("fedavg", c, 4).family == MethodFamily::FedAvg);
  CHECK(resolve_method("mm", c, 4).family == MethodFamily::MethodOfMultipliers);
  CHECK_THROWS_AS(resolve_method("fedh-9", c, 4), ConfigError);
  CHECK_THROWS_AS(resolve_method("sgd", c, 4), ConfigError);
  c.newton = {7};
  CHECK_THROWS_AS(resolve_method("fedh", c, 4), ConfigError);
}

TEST_CASE("run writes one CSV per method and a manifest") {
  const auto cfg = write_config("small.cfg", kSmall);
  const fs::path out = kWork / "out_small";
  fs::remove_all(out);
  const auto r = cli("run --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* m : {"fedh-g", "fedh-n", "fedavg"}) {
    const std::string csv = slurp(out / (std::string(m) + ".csv"));
    CHECK(count_lines(csv) == 21);  // header + K rows
    CHECK(csv.rfind("iter,delta_lambda,delta_x,delta_combined,consensus_err,"
                    "primal_grad_norm,fun_gap,elapsed_ms,uplink_bytes,downlink_bytes\n",
                    0) == 0);
  }
  const std::string fedavg = slurp(out / "fedavg.csv");
  CHECK(fedavg.find("\n1,,,,") != std::string::npos);

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["methods"].size() == 3);
  CHECK(manifest["methods"][0]["rho"].get<double>() > 0.0);
  CHECK(manifest["problem"]["clients"] == 4);
}

TEST_CASE("--seed beats the file value") {
  const auto cfg = write_config("small.cfg", kSmall);
  const fs::path out = kWork / "out_seed";
  const auto r = cli("run --config \"" + cfg.string() + "\" --seed 42 --out \"" +
                     out.string() + "\" --set methods=fedh-g");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["seed"] == 42);
  bool found = false;
  for (const auto& [k, v] : manifest["config"].items()) found |= k == "run.seed" && v == "42";
  CHECK(found);
}

TEST_CASE("config errors exit 2 naming the key") {
  const auto bad = write_config("bad.cfg", kSmall + "stepsizee = 0.1\n");
  auto r = cli("run --config \"" + bad.string() + "\"");
  CHECK(r.code == 2);
  CHECK(r.err.find("stepsizee") != std::string::npos);

  const auto missing = write_config(
      "missing.cfg", "problem.source = csv:does_not_exist.csv\nproblem.target = y\n");
  r = cli("verify --config \"" + missing.string() + "\"");
  CHECK(r.code == 2);
  CHECK(r.err.find("problem.source") != std::string::npos);

  r = cli("run --config \"" + (kWork / "nope.cfg").string() + "\"");
  CHECK(r.code == 2);
  r = cli("run");
  CHECK(r.code == 2);
  r = cli("frobnicate");
  CHECK(r.code == 2);
  r = cli("run --config \"" + write_config("small.cfg", kSmall).string() + "\" --set x");
  CHECK(r.code == 2);
}

TEST_CASE("row count follows the cadence") {
  const auto cfg = write_config("small.cfg", kSmall);
  const fs::path out = kWork / "out_cadence";
  const auto r = cli("run --config \"" + cfg.string() + "\" --out \"" + out.string() +
                     "\" --iters 30 --set run.metric_cadence=5 --set methods=fedh-n,mm");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(count_lines(slurp(out / "fedh-n.csv")) == 1 + 30 / 5);
  CHECK(count_lines(slurp(out / "mm.csv")) == 1 + 30 / 5);
}

TEST_CASE("output is byte-identical across runs and thread counts") {
  const auto cfg = write_config("det.cfg", kSmall + "methods = fedh, fedavg\nclients.newton = 2\n");
  std::string first;
  for (const char* threads : {"1", "1", "3"}) {
    const fs::path out = kWork / (std::string("out_det_") + threads);
    fs::remove_all(out);
    const auto r = cli("run --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"",
                       std::string("FEDHYBRID_THREADS=") + threads);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const std::string both = slurp(out / "fedh.csv") + slurp(out / "fedavg.csv");
    if (first.empty()) first = both;
    CHECK(both == first);
  }
}

TEST_CASE("verify passes with auto stepsizes and always prints a report") {
  const auto cfg = write_config("verify.cfg", kSmall + "methods = fedh-g\n");
  auto r = cli("verify --config \"" + cfg.string() + "\" --iters 40");
  CHECK_MESSAGE(r.code == 0, (r.out + r.err));
  CHECK(r.out.find("theorem1") != std::string::npos);

  const auto over = write_config(
      "over.cfg", kSmall +
                      "methods = fedh-g\nstepsize.mode = manual\n"
                      "stepsize.a_gradient = 0.2\nstepsize.b_gradient = 0.2\n");
  r = cli("verify --config \"" + over.string() + "\" --iters 40");
  CHECK((r.code == 0 || r.code == 1));
  CHECK(r.out.find("theorem1") != std::string::npos);
}

TEST_CASE("csv data sources through the CLI") {
  const fs::path data = fs::path(FEDHYBRID_SOURCE_DIR) / "data";
  const auto cfg = write_config(
      "housing.cfg", "problem.source = csv:" + (data / "housing_standin.csv").string() +
                         "\nproblem.target = medv\nproblem.n = 4\nproblem.mu = 1\n"
                         "partition.kind = sorted\nrun.iters = 5\nmethods = fedh-n\n");
  const fs::path out = kWork / "out_housing";
  auto r = cli("run --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"");
  CHECK_MESSAGE(r.code == 0, r.err);
  CHECK(count_lines(slurp(out / "fedh-n.csv")) == 6);
}
