#include "wncs/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <vector>

#include <CLI11.hpp>

#include "wncs/artifacts.hpp"
#include "wncs/format.hpp"
#include "wncs/kernel.hpp"
#include "wncs/policy.hpp"
#include "wncs/simulator.hpp"
#include "wncs/solver.hpp"

namespace wncs::cli {

namespace fs = std::filesystem;

namespace {

std::string out_path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.out) / name).string(); }

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.out + ": " + ec.message());
}

struct Solved {
  Kernel kernel;
  ValueTable table;
  SolveReport report;
};

Solved solve_on(const RunConfig& cfg, bool folded) {
  const Grid grid = build_grid(cfg.model, cfg.x_max_mult, cfg.grid_nodes, cfg.tau_max, folded);
  Solved s{build_kernel(cfg.model, grid), {}, {}};
  auto [table, report] = value_iteration(s.kernel, cfg.model, cfg.tol, cfg.max_iter, cfg.threads);
  s.table = std::move(table);
  s.report = std::move(report);
  return s;
}

ValueTable folded_table(const ValueTable& t) { return t.grid.folded ? t : fold_view(t); }

void log_solve(std::ostream& log, const char* label, const Solved& s) {
  log << label << ": " << (s.report.converged ? "converged" : "NOT converged") << " after "
      << s.table.iteration_count << " iterations, residual " << format_double(s.table.final_residual) << '\n';
  for (const auto& w : s.report.warnings) log << "warning: " << w << '\n';
}

}  // namespace

int cmd_solve(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out_dir(cfg);

  const Solved main = solve_on(cfg, cfg.folded);
  log_solve(log, cfg.folded ? "folded solve" : "symmetric solve", main);
  write_value_table_csv(main.table, out_path(cfg, "value_table.csv"));
  write_json(out_path(cfg, "value_table.json"), value_table_json(main.table, cfg));
  if (cfg.export_kernel) write_kernel(main.kernel, out_path(cfg, "kernel.json"));

  auto report = solve_report_json(main.report, main.table, cfg);
  bool converged = main.report.converged;
  if (cfg.solve_symmetric && cfg.folded) {
    const Solved sym = solve_on(cfg, false);
    log_solve(log, "symmetric solve", sym);
    write_value_table_csv(sym.table, out_path(cfg, "value_table_symmetric.csv"));
    report["symmetric"] = {{"converged", sym.report.converged},
                           {"iterations", sym.table.iteration_count},
                           {"final_residual", sym.table.final_residual}};
    converged = converged && sym.report.converged;
  }

  const auto extraction = extract_thresholds(folded_table(main.table));
  if (extraction.ok()) {
    write_thresholds_csv(*extraction.policy, out_path(cfg, "thresholds.csv"));
    write_json(out_path(cfg, "thresholds.json"), thresholds_json(*extraction.policy, cfg));
    report["threshold_trends"] = threshold_trends(*extraction.policy);
  }
  report["threshold_extraction"] = {{"ok", extraction.ok()}, {"upset_violations", extraction.violations.size()}};
  write_json(out_path(cfg, "solve_report.json"), report);

  if (!converged) return kNotConverged;
  if (!extraction.ok()) {
    log << "greedy policy is not of threshold form (" << extraction.violations.size() << " up-set violations)\n";
    return kVerificationFailed;
  }
  return kOk;
}

int cmd_verify(const RunConfig& cfg, const std::string& table_path_in, std::ostream& log) {
  cfg.validate();
  const std::string table_path = table_path_in.empty() ? out_path(cfg, "value_table.csv") : table_path_in;
  if (!fs::exists(table_path)) throw ConfigError("value table not found: " + table_path);

  const ValueTable table = read_value_table_csv(table_path);
  const Grid grid = build_grid(cfg.model, cfg.x_max_mult, cfg.grid_nodes, cfg.tau_max, table.grid.folded);
  check_table_matches(table, build_kernel(cfg.model, grid));

  // Checks run on the non-negative half; dominance needs the folded kernel.
  const ValueTable fold = folded_table(table);
  const Kernel fold_kernel =
      build_kernel(cfg.model, build_grid(cfg.model, cfg.x_max_mult, cfg.grid_nodes, cfg.tau_max, true));
  check_table_matches(fold, fold_kernel);

  const double tol = 10.0 * cfg.tol;
  StructureReport report = verify_monotonicity(fold, tol);
  report.merge(verify_threshold_structure(fold, tol));
  report.merge(verify_kernel_dominance(fold_kernel, fold.V, tol));

  const fs::path sym_path = fs::path(table_path).parent_path() / "value_table_symmetric.csv";
  std::optional<ValueTable> sym;
  if (!table.grid.folded) sym = table;
  else if (fs::exists(sym_path)) sym = read_value_table_csv(sym_path.string());
  if (sym) {
    const Grid sym_grid = build_grid(cfg.model, cfg.x_max_mult, cfg.grid_nodes, cfg.tau_max, false);
    check_table_matches(*sym, build_kernel(cfg.model, sym_grid));
    report.merge(verify_evenness(*sym, tol));
    if (table.grid.folded) report.merge(verify_fold_equivalence(*sym, table, tol));
  }

  ensure_out_dir(cfg);
  write_json(out_path(cfg, "structure_report.json"), structure_report_json(report, cfg));

  auto line = [&log](const char* name, const std::optional<CheckResult>& c) {
    if (!c) return;
    log << (c->pass ? "PASS " : "FAIL ") << name << " (violations " << c->violations << ", worst "
        << format_double(c->worst) << ")\n";
  };
  line("evenness", report.evenness);
  line("fold_equivalence", report.fold_equivalence);
  line("monotone_x", report.monotone_x);
  line("monotone_b", report.monotone_b);
  line("upset", report.upset);
  line("c1", report.c1);
  line("c2", report.c2);
  line("kernel_dominance", report.dominance);
  return report.all_pass() ? kOk : kVerificationFailed;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  std::vector<SchedulingPolicy> policies;
  if (!cfg.policy.empty()) {
    policies.push_back(SchedulingPolicy::from_rule("optimal", unfold_policy(read_threshold_policy(cfg.policy))));
  }
  for (const auto& name : split_list(cfg.baselines)) {
    policies.push_back(baseline_policy(parse_baseline(name), cfg.period));
  }
  if (policies.empty()) throw ConfigError("nothing to simulate: give --policy and/or --baselines");
  ensure_out_dir(cfg);

  const SimConfig sim = cfg.sim();
  std::vector<CostEstimate> rows;
  for (const auto& policy : policies) {
    rows.push_back(estimate_cost(policy, cfg.model, sim));
    const auto& r = rows.back();
    log << r.policy << ": " << format_double(r.mean) << " +- " << format_double(r.standard_error) << '\n';

    if (cfg.trace) {
      std::ofstream trace(out_path(cfg, "trace_" + policy.name + ".csv"));
      if (!trace) throw ConfigError("cannot write trace for " + policy.name);
      write_trace_header(trace);
      const long traced = std::min<long>(cfg.trace_rollouts, sim.n_rollouts);
      for (long k = 0; k < traced; ++k) {
        auto stream = RolloutStream::for_rollout(sim.seed, static_cast<std::uint64_t>(k));
        simulate_rollout(policy, cfg.model, sim, stream,
                         [&trace, k](const StepRecord& rec) { write_trace_row(trace, k, rec); });
      }
    }
  }
  write_results_csv(rows, cfg, out_path(cfg, "results.csv"));
  write_json(out_path(cfg, "results.json"), results_json(rows, cfg));
  return kOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  static const std::vector<std::string> axes{"p", "beta", "B", "a", "sigma2"};
  if (std::find(axes.begin(), axes.end(), cfg.axis) == axes.end()) {
    throw ConfigError("invalid sweep axis '" + cfg.axis + "' (valid: p, beta, B, a, sigma2)");
  }
  const auto values = split_list(cfg.values);
  if (values.empty()) throw ConfigError("sweep needs --values");

  // Reject the whole sweep before solving anything.
  std::vector<RunConfig> runs;
  for (const auto& v : values) {
    RunConfig run = cfg;
    run.set(cfg.axis, v);
    try {
      run.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("sweep " + cfg.axis + "=" + v + ": " + e.what());
    }
    runs.push_back(std::move(run));
  }
  cfg.validate();
  ensure_out_dir(cfg);

  std::ofstream csv(out_path(cfg, "sweep_thresholds.csv"));
  if (!csv) throw ConfigError("cannot write sweep_thresholds.csv");
  csv << "axis,value,tau,b,x_star,refined_x_star,converged,iterations\n";
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "sweep";
  j["config"] = artifact_config(cfg);
  j["axis"] = cfg.axis;
  auto& entries = j["runs"] = nlohmann::json::array();

  bool all_converged = true;
  bool all_threshold = true;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const Solved s = solve_on(runs[k], true);
    all_converged = all_converged && s.report.converged;
    const auto extraction = extract_thresholds(s.table);
    all_threshold = all_threshold && extraction.ok();
    log << cfg.axis << '=' << values[k] << ": " << s.table.iteration_count << " iterations"
        << (s.report.converged ? "" : " (not converged)") << (extraction.ok() ? "" : ", no threshold form") << '\n';

    nlohmann::json entry = {{"value", values[k]},
                            {"converged", s.report.converged},
                            {"iterations", s.table.iteration_count},
                            {"final_residual", s.table.final_residual},
                            {"threshold_form", extraction.ok()}};
    if (extraction.ok()) {
      const auto& p = *extraction.policy;
      auto t = thresholds_json(p, runs[k]);
      entry["thresholds"] = t["thresholds"];
      for (int tau = 0; tau <= p.tau_max; ++tau) {
        for (int b = 0; b <= p.B; ++b) {
          csv << cfg.axis << ',' << values[k] << ',' << tau << ',' << b << ',' << format_double(p.x_star(tau, b))
              << ',' << format_double(p.refined_x_star(tau, b)) << ',' << (s.report.converged ? "true" : "false")
              << ',' << s.table.iteration_count << '\n';
        }
      }
    }
    entries.push_back(std::move(entry));
  }
  write_json(out_path(cfg, "sweep.json"), j);
  if (!all_converged) return kNotConverged;
  return all_threshold ? kOk : kVerificationFailed;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scheduling MDP for a wireless networked control loop with energy harvesting"};
  app.require_subcommand(1);
  app.footer("Config keys (key = value per line in --config files, or --set key=value):\n" + RunConfig::describe() +
             "\nExit codes: 0 success, 1 usage/config error, 2 non-convergence, 3 verification failure.");

  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
  bool trace = false;
  std::string table_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "key = value config file (or a JSON artifact)");
    sub->add_option("--set", sets, "override any config key: key=value (repeatable)");
    auto opt = [&](const char* flag, const char* key, const char* help) {
      sub->add_option_function<std::string>(flag, [&flags, key](const std::string& v) { flags[key] = v; }, help);
    };
    opt("--out", "out", "output directory");
    opt("--seed", "seed", "simulation seed");
    opt("--tol", "tol", "value iteration tolerance");
    opt("--max-iter", "max_iter", "value iteration cap");
    opt("--grid-nodes", "grid_nodes", "symmetric x-grid nodes (odd, >= 31)");
    opt("--tau-max", "tau_max", "age truncation cap");
    opt("--x-max-mult", "x_max_mult", "grid half-width multiplier");
    opt("--threads", "threads", "OpenMP threads (0 = default)");
    opt("--policy", "policy", "thresholds.csv or thresholds.json to simulate");
    opt("--baselines", "baselines", "comma list of baselines");
    opt("--axis", "axis", "sweep axis: p, beta, B, a, sigma2");
    opt("--values", "values", "comma list of sweep values");
    sub->add_flag("--trace", trace, "write per-step trace CSVs");
  };

  auto* solve = app.add_subcommand("solve", "value iteration, value table and thresholds");
  auto* verify = app.add_subcommand("verify", "structural checks on a solved value table");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo costs of the optimal policy and baselines");
  auto* sweep = app.add_subcommand("sweep", "thresholds across one model parameter");
  for (auto* sub : {solve, verify, simulate, sweep}) add_common(sub);
  verify->add_option("table", table_path, "value table CSV (default <out>/value_table.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : flags) cfg.set(key, value);
    if (trace) cfg.trace = true;

    if (*solve) return cmd_solve(cfg, out);
    if (*verify) return cmd_verify(cfg, table_path, out);
    if (*simulate) return cmd_simulate(cfg, out);
    return cmd_sweep(cfg, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed artifact: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
}

}  // namespace wncs::cli
