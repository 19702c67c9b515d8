#include "wncs/artifacts.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "wncs/format.hpp"

namespace wncs {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

double null_as_inf(const nlohmann::json& v) { return v.is_null() ? kInf : v.get<double>(); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

Action parse_action(const std::string& s) {
  if (s == "idle") return Action::Idle;
  if (s == "uplink") return Action::Uplink;
  if (s == "downlink") return Action::Downlink;
  throw ConfigError("unknown action '" + s + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

nlohmann::json grid_json(const Grid& g) {
  return {{"n_nodes", g.size()}, {"dx", g.dx}, {"x_max", g.x_max}, {"tau_max", g.tau_max}, {"folded", g.folded}};
}

nlohmann::json check_json(const std::optional<CheckResult>& c) {
  if (!c) return nullptr;
  return {{"pass", c->pass}, {"violations", c->violations}, {"worst", c->worst}, {"notes", c->notes}};
}

}  // namespace

nlohmann::json artifact_config(const RunConfig& config) {
  auto j = config.to_json();
  j.erase("threads");
  j.erase("out");
  return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_value_table_csv(const ValueTable& t, const std::string& path) {
  auto out = open_out(path);
  out << "x,tau,y,b,V,Q_idle,Q_uplink,Q_downlink,action\n";
  const SliceLayout& L = t.layout;
  for (std::size_t s = 0; s < L.count(); ++s) {
    for (std::size_t i = 0; i < t.n(); ++i) {
      out << format_double(t.grid.x_nodes[i]) << ',' << L.tau_of(s) << ',' << L.y_of(s) << ',' << L.b_of(s) << ','
          << format_double(t.v(s, i)) << ',' << format_double(t.q(s, Action::Idle, i)) << ','
          << format_double(t.q(s, Action::Uplink, i)) << ',' << format_double(t.q(s, Action::Downlink, i)) << ','
          << to_string(t.action(s, i)) << '\n';
    }
  }
}

ValueTable read_value_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read value table " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("x,tau,y,b,V,Q_idle,Q_uplink,Q_downlink,action", 0) != 0) {
    throw ConfigError("unexpected value table header in " + path);
  }
  struct Row {
    double x;
    int tau, y, b;
    double v, q0, q1, q2;
    Action u;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 9) throw ConfigError("malformed value table row in " + path + ": " + line);
    rows.push_back({parse_double(c[0]), std::stoi(c[1]), std::stoi(c[2]), std::stoi(c[3]), parse_double(c[4]),
                    parse_double(c[5]), parse_double(c[6]), parse_double(c[7]), parse_action(c[8])});
  }
  if (rows.empty()) throw ConfigError("empty value table " + path);

  ValueTable t;
  int tau_max = 0;
  int B = 0;
  for (const auto& r : rows) {
    tau_max = std::max(tau_max, r.tau);
    B = std::max(B, r.b);
  }
  t.layout = SliceLayout{tau_max, B};
  if (rows.size() % t.layout.count() != 0) throw ConfigError("value table row count does not match its layout");
  const std::size_t n = rows.size() / t.layout.count();
  t.grid.tau_max = tau_max;
  for (std::size_t i = 0; i < n; ++i) t.grid.x_nodes.push_back(rows[i].x);
  t.grid.folded = t.grid.x_nodes.front() >= 0.0;
  t.grid.x_max = t.grid.x_nodes.back();
  t.grid.dx = n > 1 ? t.grid.x_nodes[1] - t.grid.x_nodes[0] : 2.0 * t.grid.x_max;

  t.V.resize(rows.size());
  t.Q.resize(rows.size() * kNumActions);
  t.policy.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    const std::size_t s = k / n;
    const std::size_t i = k % n;
    if (t.layout.index(r.tau, r.y, r.b) != s || r.x != t.grid.x_nodes[i]) {
      throw ConfigError("value table rows out of order in " + path);
    }
    t.V[k] = r.v;
    t.Q[(s * kNumActions + 0) * n + i] = r.q0;
    t.Q[(s * kNumActions + 1) * n + i] = r.q1;
    t.Q[(s * kNumActions + 2) * n + i] = r.q2;
    t.policy[k] = r.u;
  }
  return t;
}

void check_table_matches(const ValueTable& t, const Kernel& k) {
  if (t.grid.folded != k.grid.folded || t.n() != k.grid.size() || t.layout.tau_max != k.layout.tau_max ||
      t.layout.B != k.layout.B) {
    throw ConfigError("value table does not match the configured grid (nodes " + std::to_string(t.n()) + " vs " +
                      std::to_string(k.grid.size()) + ")");
  }
  for (std::size_t i = 0; i < t.n(); ++i) {
    const double x = k.grid.x_nodes[i];
    if (std::abs(t.grid.x_nodes[i] - x) > 1e-9 * std::max(1.0, std::abs(x))) {
      throw ConfigError("value table x nodes do not match the configured grid");
    }
  }
}

ValueTable fold_view(const ValueTable& sym) {
  if (sym.grid.folded) return sym;
  const std::size_t zero = sym.grid.zero_index();
  const std::size_t n = sym.n();
  const std::size_t m = n - zero;
  ValueTable t;
  t.layout = sym.layout;
  t.grid = Grid::uniform(sym.grid.x_max, n, sym.grid.tau_max, true);
  t.iteration_count = sym.iteration_count;
  t.final_residual = sym.final_residual;
  t.V.resize(sym.layout.count() * m);
  t.Q.resize(sym.layout.count() * kNumActions * m);
  t.policy.resize(sym.layout.count() * m);
  for (std::size_t s = 0; s < sym.layout.count(); ++s) {
    for (std::size_t j = 0; j < m; ++j) {
      t.V[s * m + j] = sym.v(s, zero + j);
      t.policy[s * m + j] = sym.action(s, zero + j);
      for (int u = 0; u < kNumActions; ++u) {
        t.Q[(s * kNumActions + static_cast<std::size_t>(u)) * m + j] = sym.q(s, static_cast<Action>(u), zero + j);
      }
    }
  }
  return t;
}

nlohmann::json value_table_json(const ValueTable& t, const RunConfig& config) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "value_table";
  j["config"] = artifact_config(config);
  j["grid"] = grid_json(t.grid);
  j["x_nodes"] = t.grid.x_nodes;
  j["layout"] = {{"tau_max", t.layout.tau_max}, {"B", t.layout.B}, {"slice_index", "(tau * 2 + y) * (B + 1) + b"}};
  j["iteration_count"] = t.iteration_count;
  j["final_residual"] = t.final_residual;
  j["V"] = t.V;
  auto& q = j["Q"] = nlohmann::json::array();
  for (double v : t.Q) q.push_back(finite_or_null(v));
  auto& pol = j["policy"] = nlohmann::json::array();
  for (Action u : t.policy) pol.push_back(index(u));
  return j;
}

void write_thresholds_csv(const ThresholdPolicy& p, const std::string& path) {
  auto out = open_out(path);
  out << "tau,b,x_star,refined_x_star\n";
  for (int tau = 0; tau <= p.tau_max; ++tau) {
    for (int b = 0; b <= p.B; ++b) {
      out << tau << ',' << b << ',' << format_double(p.x_star(tau, b)) << ','
          << format_double(p.refined_x_star(tau, b)) << '\n';
    }
  }
}

nlohmann::json thresholds_json(const ThresholdPolicy& p, const RunConfig& config) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "thresholds";
  j["config"] = artifact_config(config);
  j["tau_max"] = p.tau_max;
  j["B"] = p.B;
  j["grid_ref"] = p.grid_ref;
  j["nodes"] = p.nodes;
  auto& rows = j["thresholds"] = nlohmann::json::array();
  for (int tau = 0; tau <= p.tau_max; ++tau) {
    for (int b = 0; b <= p.B; ++b) {
      rows.push_back({{"tau", tau},
                      {"b", b},
                      {"x_star", finite_or_null(p.x_star(tau, b))},
                      {"refined_x_star", finite_or_null(p.refined_x_star(tau, b))}});
    }
  }
  auto& below = j["below_rule"] = nlohmann::json::array();
  for (Action u : p.below_rule) below.push_back(index(u));
  j["trends"] = threshold_trends(p);
  return j;
}

ThresholdPolicy threshold_policy_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "thresholds") throw ConfigError("not a thresholds artifact");
  ThresholdPolicy p;
  p.tau_max = j.at("tau_max");
  p.B = j.at("B");
  p.grid_ref = j.value("grid_ref", "");
  p.nodes = j.at("nodes").get<std::vector<double>>();
  const std::size_t cells = static_cast<std::size_t>(p.tau_max + 1) * (p.B + 1);
  p.thresholds.assign(cells, kInf);
  p.refined_thresholds.assign(cells, kInf);
  for (const auto& row : j.at("thresholds")) {
    const std::size_t c = p.cell(row.at("tau"), row.at("b"));
    p.thresholds.at(c) = null_as_inf(row.at("x_star"));
    p.refined_thresholds.at(c) = null_as_inf(row.at("refined_x_star"));
  }
  for (const auto& u : j.at("below_rule")) p.below_rule.push_back(static_cast<Action>(u.get<int>()));
  if (p.below_rule.size() != SliceLayout{p.tau_max, p.B}.count() * p.nodes.size()) {
    throw ConfigError("thresholds artifact: below_rule has the wrong size");
  }
  return p;
}

ThresholdPolicy read_threshold_policy(const std::string& path) {
  const fs::path file(path);
  if (!fs::exists(file)) throw ConfigError("policy artifact not found: " + path);
  if (file.extension() == ".json") return threshold_policy_from_json(read_json(path));

  const fs::path table_path = file.parent_path() / "value_table.csv";
  if (!fs::exists(table_path)) {
    throw ConfigError("thresholds.csv needs value_table.csv in the same directory: " + table_path.string());
  }
  const ValueTable table = read_value_table_csv(table_path.string());
  auto extraction = extract_thresholds(table.grid.folded ? table : fold_view(table));
  if (!extraction.ok()) throw ConfigError("value table next to " + path + " has no threshold structure");
  ThresholdPolicy p = std::move(*extraction.policy);

  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("tau,b,x_star", 0) != 0) {
    throw ConfigError("unexpected thresholds header in " + path);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() < 3) throw ConfigError("malformed thresholds row: " + line);
    const int tau = std::stoi(c[0]);
    const int b = std::stoi(c[1]);
    if (tau < 0 || tau > p.tau_max || b < 0 || b > p.B) throw ConfigError("thresholds row outside the table layout");
    p.thresholds[p.cell(tau, b)] = parse_double(c[2]);
    if (c.size() > 3) p.refined_thresholds[p.cell(tau, b)] = parse_double(c[3]);
  }
  return p;
}

nlohmann::json threshold_trends(const ThresholdPolicy& p) {
  long up_tau = 0, down_tau = 0, up_b = 0, down_b = 0;
  for (int tau = 0; tau <= p.tau_max; ++tau) {
    for (int b = 0; b <= p.B; ++b) {
      const double here = p.x_star(tau, b);
      if (!std::isfinite(here)) continue;
      if (tau < p.tau_max && std::isfinite(p.x_star(tau + 1, b))) {
        const double next = p.x_star(tau + 1, b);
        up_tau += next > here;
        down_tau += next < here;
      }
      if (b < p.B && std::isfinite(p.x_star(tau, b + 1))) {
        const double next = p.x_star(tau, b + 1);
        up_b += next > here;
        down_b += next < here;
      }
    }
  }
  return {{"along_tau", {{"increasing_steps", up_tau}, {"decreasing_steps", down_tau}}},
          {"along_b", {{"increasing_steps", up_b}, {"decreasing_steps", down_b}}}};
}

nlohmann::json solve_report_json(const SolveReport& r, const ValueTable& t, const RunConfig& config) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "solve_report";
  j["config"] = artifact_config(config);
  j["converged"] = r.converged;
  j["diverged"] = r.diverged;
  j["iterations"] = t.iteration_count;
  j["final_residual"] = t.final_residual;
  j["residual_history"] = r.residual_history;
  j["contraction_estimates"] = r.contraction_estimates;
  j["warnings"] = r.warnings;
  j["grid"] = grid_json(t.grid);
  j["runtime"] = {{"timestamp", utc_timestamp()}, {"wall_time_s", r.wall_time}, {"threads", config.threads}};
  return j;
}

nlohmann::json structure_report_json(const StructureReport& r, const RunConfig& config) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "structure_report";
  j["config"] = artifact_config(config);
  j["all_pass"] = r.all_pass();
  j["evenness"] = check_json(r.evenness);
  j["evenness_max_dev"] = r.evenness ? nlohmann::json(r.evenness->worst) : nlohmann::json();
  j["evenness_action_mismatches"] = r.evenness_action_mismatches;
  j["fold_equivalence"] = check_json(r.fold_equivalence);
  j["monotone_x"] = check_json(r.monotone_x);
  j["monotone_b"] = check_json(r.monotone_b);
  j["upset"] = check_json(r.upset);
  j["upset_per_cell"] = r.upset_per_cell;
  j["c1"] = check_json(r.c1);
  j["c2"] = check_json(r.c2);
  j["kernel_dominance"] = check_json(r.dominance);
  return j;
}

void write_results_csv(const std::vector<CostEstimate>& rows, const RunConfig& config, const std::string& path) {
  auto out = open_out(path);
  out << "policy,mean,se,n_rollouts,horizon,seed,truncation_bound,frac_idle,frac_uplink,frac_downlink,"
         "uplink_success_rate,downlink_success_rate,mean_age,mean_battery\n";
  for (const auto& r : rows) {
    out << r.policy << ',' << format_double(r.mean) << ',' << format_double(r.standard_error) << ',' << r.n_rollouts
        << ',' << r.horizon << ',' << config.seed << ',' << format_double(r.truncation_bound) << ','
        << format_double(r.action_fractions[0]) << ',' << format_double(r.action_fractions[1]) << ','
        << format_double(r.action_fractions[2]) << ',' << format_double(r.uplink_success_rate) << ','
        << format_double(r.downlink_success_rate) << ',' << format_double(r.mean_age) << ','
        << format_double(r.mean_battery) << '\n';
  }
}

nlohmann::json results_json(const std::vector<CostEstimate>& rows, const RunConfig& config) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "simulation_results";
  j["config"] = artifact_config(config);
  j["seed"] = config.seed;
  auto& arr = j["results"] = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"policy", r.policy},
                   {"mean", r.mean},
                   {"se", r.standard_error},
                   {"n_rollouts", r.n_rollouts},
                   {"horizon", r.horizon},
                   {"truncation_bound", r.truncation_bound},
                   {"action_fractions", r.action_fractions},
                   {"uplink_success_rate", r.uplink_success_rate},
                   {"downlink_success_rate", r.downlink_success_rate},
                   {"mean_age", r.mean_age},
                   {"mean_battery", r.mean_battery}});
  }
  j["runtime"] = {{"timestamp", utc_timestamp()}, {"threads", config.threads}};
  return j;
}

void write_trace_header(std::ostream& out) { out << "rollout,t,x,xhat,tau,y,b,u,delivered,cost\n"; }

void write_trace_row(std::ostream& out, long rollout, const StepRecord& r) {
  out << rollout << ',' << r.t << ',' << format_double(r.x) << ',' << format_double(r.xhat) << ',' << r.tau << ','
      << r.y << ',' << r.b << ',' << index(r.u) << ',' << (r.delivered ? 1 : 0) << ',' << format_double(r.cost)
      << '\n';
}

}  // namespace wncs
