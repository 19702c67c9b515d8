#include "wncs/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "wncs/format.hpp"

namespace wncs {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("bad number for " + key + ": '" + v + "'");
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("bad integer for " + key + ": '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("bad seed for " + key + ": '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto t = trim(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

struct KeyInfo {
  const char* key;
  const char* help;
};

// Order fixes the key order of serialized configs.
const KeyInfo kKeys[] = {
    {"a", "plant gain"},
    {"sigma2", "process noise variance"},
    {"p", "packet drop probability (both channels)"},
    {"p_up", "uplink drop probability, -1 = use p"},
    {"p_down", "downlink drop probability, -1 = use p"},
    {"beta", "discount factor in (0, 1)"},
    {"B", "battery capacity"},
    {"harvest_probs", "comma list of P(harvest = l), l = 0..L"},
    {"grid_nodes", "x nodes of the symmetric grid (odd, >= 31)"},
    {"x_max_mult", "grid half-width in units of sqrt(max eps_tau)"},
    {"tau_max", "age truncation cap (>= 2)"},
    {"folded", "solve the folded MDP (true) or the original one"},
    {"tol", "value iteration stopping tolerance (sup norm)"},
    {"max_iter", "value iteration iteration cap"},
    {"solve_symmetric", "solve also writes the symmetric-grid table for evenness checks"},
    {"export_kernel", "solve also writes kernel.json"},
    {"threads", "OpenMP threads, 0 = runtime default"},
    {"seed", "simulation seed"},
    {"n_rollouts", "Monte Carlo rollouts per policy"},
    {"horizon", "simulation horizon, 0 = ceil(log 1e-6 / log beta)"},
    {"x0_mean", "mean of x(0)"},
    {"x0_var", "variance of x(0), 0 = point mass"},
    {"y0", "initial control-packet flag"},
    {"b0", "initial battery, -1 = B"},
    {"period", "period k of the periodic baseline"},
    {"trace", "write per-step traces"},
    {"trace_rollouts", "rollouts per policy included in traces"},
    {"out", "output directory"},
    {"policy", "threshold artifact (thresholds.csv or thresholds.json) to simulate"},
    {"baselines", "comma list of baselines to simulate"},
    {"axis", "sweep axis: p, beta, B, a or sigma2"},
    {"values", "comma list of sweep values"},
};

std::string num(double v) { return format_double(v); }

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(to_double("list", item));
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& k : kKeys) v.emplace_back(k.key);
    return v;
  }();
  return names;
}

std::string RunConfig::describe() {
  const RunConfig defaults;
  const auto j = defaults.to_json();
  std::ostringstream os;
  for (const auto& k : kKeys) {
    const auto& v = j.at(k.key);
    os << "  " << k.key << " = " << (v.is_string() ? v.get<std::string>() : v.dump()) << "    # " << k.help
       << '\n';
  }
  return os.str();
}

void RunConfig::set(const std::string& key_in, const std::string& value) {
  const std::string key = trim(key_in);
  if (key == "a") model.a = to_double(key, value);
  else if (key == "sigma2") model.sigma2 = to_double(key, value);
  else if (key == "p") model.p = to_double(key, value);
  else if (key == "p_up") model.p_up = to_double(key, value);
  else if (key == "p_down") model.p_down = to_double(key, value);
  else if (key == "beta") model.beta = to_double(key, value);
  else if (key == "B") model.B = static_cast<int>(to_long(key, value));
  else if (key == "harvest_probs") model.harvest_probs = parse_double_list(value);
  else if (key == "grid_nodes") grid_nodes = static_cast<int>(to_long(key, value));
  else if (key == "x_max_mult") x_max_mult = to_double(key, value);
  else if (key == "tau_max") tau_max = static_cast<int>(to_long(key, value));
  else if (key == "folded") folded = to_bool(key, value);
  else if (key == "tol") tol = to_double(key, value);
  else if (key == "max_iter") max_iter = static_cast<int>(to_long(key, value));
  else if (key == "solve_symmetric") solve_symmetric = to_bool(key, value);
  else if (key == "export_kernel") export_kernel = to_bool(key, value);
  else if (key == "threads") threads = static_cast<int>(to_long(key, value));
  else if (key == "seed") seed = to_u64(key, value);
  else if (key == "n_rollouts") n_rollouts = to_long(key, value);
  else if (key == "horizon") horizon = static_cast<int>(to_long(key, value));
  else if (key == "x0_mean") x0_mean = to_double(key, value);
  else if (key == "x0_var") x0_var = to_double(key, value);
  else if (key == "y0") y0 = static_cast<int>(to_long(key, value));
  else if (key == "b0") b0 = static_cast<int>(to_long(key, value));
  else if (key == "period") period = static_cast<int>(to_long(key, value));
  else if (key == "trace") trace = to_bool(key, value);
  else if (key == "trace_rollouts") trace_rollouts = static_cast<int>(to_long(key, value));
  else if (key == "out") out = trim(value);
  else if (key == "policy") policy = trim(value);
  else if (key == "baselines") baselines = trim(value);
  else if (key == "axis") axis = trim(value);
  else if (key == "values") values = trim(value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto start = text.find_first_not_of(" \t\r\n");

  if (start != std::string::npos && text[start] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("invalid JSON config " + path + ": " + e.what());
    }
    if (j.contains("config")) j = j.at("config");
    for (const auto& [key, v] : j.items()) {
      if (key == "schema_version") {
        if (v != kSchemaVersion) throw ConfigError("unsupported schema_version in " + path);
        continue;
      }
      if (v.is_string()) set(key, v.get<std::string>());
      else if (v.is_boolean()) set(key, v.get<bool>() ? "true" : "false");
      else if (v.is_array()) {
        std::string joined;
        for (const auto& e : v) joined += (joined.empty() ? "" : ",") + num(e.get<double>());
        set(key, joined);
      } else if (v.is_number_float()) set(key, num(v.get<double>()));
      else set(key, v.dump());
    }
    return;
  }

  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void RunConfig::validate() const {
  model.validate();
  if (grid_nodes < 31 || (!folded && grid_nodes % 2 == 0)) {
    throw ConfigError("grid_nodes must be >= 31 (and odd for symmetric grids)");
  }
  if (solve_symmetric && grid_nodes % 2 == 0) throw ConfigError("solve_symmetric needs an odd grid_nodes");
  if (!(x_max_mult > 0.0)) throw ConfigError("x_max_mult must be > 0");
  if (tau_max < 2) throw ConfigError("tau_max must be >= 2");
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
  if (max_iter < 0) throw ConfigError("max_iter must be >= 0");
  if (n_rollouts < 1) throw ConfigError("n_rollouts must be >= 1");
  if (horizon < 0) throw ConfigError("horizon must be >= 0");
  if (x0_var < 0.0) throw ConfigError("x0_var must be >= 0");
  if (y0 != 0 && y0 != 1) throw ConfigError("y0 must be 0 or 1");
  if (b0 > model.B) throw ConfigError("b0 must be <= B");
  if (period < 1) throw ConfigError("period must be >= 1");
  if (trace_rollouts < 1) throw ConfigError("trace_rollouts must be >= 1");
}

SimConfig RunConfig::sim() const {
  SimConfig s;
  s.horizon = horizon;
  s.n_rollouts = n_rollouts;
  s.seed = seed;
  s.x0 = {x0_mean, x0_var};
  s.y0 = y0;
  s.b0 = b0;
  s.threads = threads;
  return s;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  j["schema_version"] = kSchemaVersion;
  j["a"] = model.a;
  j["sigma2"] = model.sigma2;
  j["p"] = model.p;
  j["p_up"] = model.p_up;
  j["p_down"] = model.p_down;
  j["beta"] = model.beta;
  j["B"] = model.B;
  j["harvest_probs"] = model.harvest_probs;
  j["grid_nodes"] = grid_nodes;
  j["x_max_mult"] = x_max_mult;
  j["tau_max"] = tau_max;
  j["folded"] = folded;
  j["tol"] = tol;
  j["max_iter"] = max_iter;
  j["solve_symmetric"] = solve_symmetric;
  j["export_kernel"] = export_kernel;
  j["threads"] = threads;
  j["seed"] = seed;
  j["n_rollouts"] = n_rollouts;
  j["horizon"] = horizon;
  j["x0_mean"] = x0_mean;
  j["x0_var"] = x0_var;
  j["y0"] = y0;
  j["b0"] = b0;
  j["period"] = period;
  j["trace"] = trace;
  j["trace_rollouts"] = trace_rollouts;
  j["out"] = out;
  j["policy"] = policy;
  j["baselines"] = baselines;
  j["axis"] = axis;
  j["values"] = values;
  return j;
}

}  // namespace wncs
