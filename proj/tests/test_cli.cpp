#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "wncs/artifacts.hpp"
#include "wncs/cli.hpp"

using namespace wncs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome wncs_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "wncs");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wncs_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

nlohmann::json without_runtime(nlohmann::json j) {
  j.erase("runtime");
  return j;
}

// Reduced grid keeps the CLI tests quick.
const std::vector<std::string> kSmall{"--grid-nodes", "41", "--tau-max", "6"};

std::vector<std::string> with(std::vector<std::string> args, const std::vector<std::string>& extra = kSmall) {
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

TEST_CASE("solve with the default configuration writes parseable artifacts") {
  const auto dir = scratch("solve_default");
  const auto r = wncs_cli({"solve", "--out", dir.string()});
  REQUIRE(r.code == cli::kOk);
  for (const char* name : {"value_table.csv", "value_table.json", "thresholds.csv", "thresholds.json",
                           "solve_report.json", "value_table_symmetric.csv"}) {
    CHECK(fs::exists(dir / name));
  }
  const auto report = read_json((dir / "solve_report.json").string());
  CHECK(report.at("converged") == true);
  CHECK(report.at("schema_version") == kSchemaVersion);
  CHECK(report.at("config").at("grid_nodes") == 201);
  CHECK_NOTHROW(read_value_table_csv((dir / "value_table.csv").string()));
  CHECK_NOTHROW(read_threshold_policy((dir / "thresholds.csv").string()));

  const auto v = wncs_cli({"verify", "--out", dir.string()});
  CHECK(v.code == cli::kOk);
  const auto structure = read_json((dir / "structure_report.json").string());
  CHECK(structure.at("all_pass") == true);
  CHECK(structure.at("evenness").at("pass") == true);
  CHECK(structure.at("kernel_dominance").at("pass") == true);
}

TEST_CASE("solve reports non-convergence with exit code 2") {
  const auto dir = scratch("solve_cap");
  CHECK(wncs_cli(with({"solve", "--out", dir.string(), "--max-iter", "1"})).code == cli::kNotConverged);
  CHECK(read_json((dir / "solve_report.json").string()).at("converged") == false);
}

TEST_CASE("verify detects tampering, missing files and grid mismatches") {
  const auto dir = scratch("verify");
  REQUIRE(wncs_cli(with({"solve", "--out", dir.string(), "--set", "solve_symmetric=false"})).code == cli::kOk);
  CHECK(wncs_cli(with({"verify", "--out", dir.string()})).code == cli::kOk);

  ValueTable t = read_value_table_csv((dir / "value_table.csv").string());
  t.V[t.layout.index(2, 1, 1) * t.n() + 10] -= 5.0;
  write_value_table_csv(t, (dir / "tampered.csv").string());
  const auto tampered = wncs_cli(with({"verify", (dir / "tampered.csv").string(), "--out", dir.string()}));
  CHECK(tampered.code == cli::kVerificationFailed);
  CHECK(tampered.out.find("FAIL monotone_x") != std::string::npos);
  CHECK(read_json((dir / "structure_report.json").string()).at("monotone_x").at("pass") == false);

  const auto missing = wncs_cli(with({"verify", (dir / "nope.csv").string(), "--out", dir.string()}));
  CHECK(missing.code == cli::kUsageError);
  CHECK(missing.err.find("not found") != std::string::npos);

  const auto mismatch = wncs_cli({"verify", "--out", dir.string(), "--grid-nodes", "51", "--tau-max", "6"});
  CHECK(mismatch.code == cli::kUsageError);
}

TEST_CASE("simulate: rows, determinism and traces") {
  const auto dir = scratch("simulate");
  REQUIRE(wncs_cli(with({"solve", "--out", dir.string()})).code == cli::kOk);
  const std::string policy = (dir / "thresholds.csv").string();
  const std::vector<std::string> sim{"--policy", policy, "--baselines", "never_act,greedy_uplink",
                                     "--set", "n_rollouts=500", "--seed", "11"};

  const auto a = dir / "a";
  const auto b = dir / "b";
  REQUIRE(wncs_cli(with({"simulate", "--out", a.string(), "--threads", "1"}, sim)).code == cli::kOk);
  REQUIRE(wncs_cli(with({"simulate", "--out", b.string(), "--threads", "4"}, sim)).code == cli::kOk);
  CHECK(lines(a / "results.csv") == 4);
  CHECK(slurp(a / "results.csv") == slurp(b / "results.csv"));
  CHECK(without_runtime(read_json((a / "results.json").string())) ==
        without_runtime(read_json((b / "results.json").string())));
  const auto results = read_json((a / "results.json").string());
  CHECK(results.at("results").size() == 3);
  CHECK(results.at("results")[0].at("policy") == "optimal");
  CHECK(results.at("seed") == 11);

  const auto traced = dir / "traced";
  auto args = with({"simulate", "--out", traced.string(), "--trace", "--set", "trace_rollouts=2", "--set",
                    "horizon=25"},
                   sim);
  REQUIRE(wncs_cli(args).code == cli::kOk);
  for (const char* name : {"trace_optimal.csv", "trace_never_act.csv", "trace_greedy_uplink.csv"}) {
    CHECK(lines(traced / name) == 1 + 2 * 25);
  }
  CHECK(slurp(traced / "trace_never_act.csv").rfind("rollout,t,x,xhat,tau,y,b,u,delivered,cost\n", 0) == 0);
}

TEST_CASE("simulate rejects unknown baselines and policies") {
  const auto dir = scratch("simulate_bad");
  const auto r = wncs_cli({"simulate", "--out", dir.string(), "--baselines", "never_act,always_on"});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("greedy_uplink") != std::string::npos);
  CHECK(wncs_cli({"simulate", "--out", dir.string(), "--policy", (dir / "missing.csv").string()}).code ==
        cli::kUsageError);
}

TEST_CASE("sweeps") {
  const auto dir = scratch("sweep");
  SUBCASE("drop probability") {
    REQUIRE(wncs_cli(with({"sweep", "--out", dir.string(), "--axis", "p", "--values", "0.0,0.2,0.5"})).code ==
            cli::kOk);
    const auto j = read_json((dir / "sweep.json").string());
    CHECK(j.at("runs").size() == 3);
    CHECK(lines(dir / "sweep_thresholds.csv") == 1 + 3 * 7 * 4);
  }
  SUBCASE("battery capacity") {
    REQUIRE(wncs_cli(with({"sweep", "--out", dir.string(), "--axis", "B", "--values", "1,2,4"})).code ==
            cli::kOk);
    const auto j = read_json((dir / "sweep.json").string());
    const int caps[] = {1, 2, 4};
    for (int k = 0; k < 3; ++k) {
      int max_b = -1;
      for (const auto& row : j.at("runs")[k].at("thresholds")) max_b = std::max(max_b, row.at("b").get<int>());
      CHECK(max_b == caps[k]);
    }
    CHECK(lines(dir / "sweep_thresholds.csv") == 1 + 7 * (2 + 3 + 5));
  }
  SUBCASE("invalid requests") {
    const auto beta = wncs_cli(with({"sweep", "--out", dir.string(), "--axis", "beta", "--values", "0.5,1.0"}));
    CHECK(beta.code == cli::kUsageError);
    CHECK(beta.err.find("beta") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "sweep.json"));
    CHECK(wncs_cli(with({"sweep", "--out", dir.string(), "--axis", "gamma", "--values", "1"})).code ==
          cli::kUsageError);
    CHECK(wncs_cli(with({"sweep", "--out", dir.string(), "--axis", "p"})).code == cli::kUsageError);
  }
}

TEST_CASE("flags override the config file, which overrides defaults") {
  const auto dir = scratch("precedence");
  {
    std::ofstream f(dir / "run.cfg");
    f << "seed = 5\nn_rollouts = 50\nbaselines = never_act\nhorizon = 10\n";
  }
  const std::string cfg = (dir / "run.cfg").string();
  REQUIRE(wncs_cli({"simulate", "--config", cfg, "--out", (dir / "file").string()}).code == cli::kOk);
  REQUIRE(wncs_cli({"simulate", "--config", cfg, "--seed", "9", "--out", (dir / "flag").string()}).code ==
          cli::kOk);
  const auto file = read_json((dir / "file" / "results.json").string());
  const auto flag = read_json((dir / "flag" / "results.json").string());
  CHECK(file.at("config").at("seed") == 5);
  CHECK(flag.at("config").at("seed") == 9);
  CHECK(flag.at("config").at("n_rollouts") == 50);
  CHECK(file.at("config").at("p") == 0.2);

  {
    std::ofstream f(dir / "typo.cfg");
    f << "seeds = 5\n";
  }
  CHECK(wncs_cli({"simulate", "--config", (dir / "typo.cfg").string()}).code == cli::kUsageError);
  CHECK(wncs_cli({"simulate", "--set", "seed"}).code == cli::kUsageError);
}

TEST_CASE("re-running from an embedded config reproduces the artifacts") {
  const auto dir = scratch("reproduce");
  const auto first = dir / "first";
  const auto second = dir / "second";
  REQUIRE(wncs_cli(with({"solve", "--out", first.string(), "--set", "p=0.3"})).code == cli::kOk);
  REQUIRE(wncs_cli({"solve", "--config", (first / "solve_report.json").string(), "--out", second.string(),
                    "--threads", "3"})
              .code == cli::kOk);
  for (const char* name : {"value_table.csv", "value_table.json", "thresholds.csv", "thresholds.json",
                           "value_table_symmetric.csv"}) {
    CHECK(slurp(first / name) == slurp(second / name));
  }
  CHECK(without_runtime(read_json((first / "solve_report.json").string())) ==
        without_runtime(read_json((second / "solve_report.json").string())));
}

TEST_CASE("usage errors") {
  CHECK(wncs_cli({}).code == cli::kUsageError);
  CHECK(wncs_cli({"launch"}).code == cli::kUsageError);
  CHECK(wncs_cli({"solve", "--frobnicate"}).code == cli::kUsageError);
  CHECK(wncs_cli({"solve", "--grid-nodes", "20"}).code == cli::kUsageError);
  const auto help = wncs_cli({"--help"});
  CHECK(help.code == cli::kOk);
  CHECK(help.out.find("harvest_probs") != std::string::npos);
  CHECK(help.out.find("Exit codes") != std::string::npos);
}
