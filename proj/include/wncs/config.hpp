#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "wncs/model.hpp"
#include "wncs/simulator.hpp"

namespace wncs {

inline constexpr int kSchemaVersion = 1;

/// Every knob of a run. Loaded from defaults, then a config file, then
/// command-line flags; each later source overrides the earlier ones.
struct RunConfig {
  ModelParams model;

  int grid_nodes = 201;
  double x_max_mult = 5.0;
  int tau_max = 25;
  bool folded = true;

  double tol = 1e-6;
  int max_iter = 1000;
  bool solve_symmetric = true;
  bool export_kernel = false;
  int threads = 0;

  std::uint64_t seed = 1;
  long n_rollouts = 10000;
  int horizon = 0;
  double x0_mean = 0.0;
  double x0_var = 1.0;
  int y0 = 0;
  int b0 = -1;
  int period = 4;
  bool trace = false;
  int trace_rollouts = 1;

  std::string out = "out";
  std::string policy;
  std::string baselines = "never_act,periodic,greedy_uplink,random_admissible";
  std::string axis;
  std::string values;

  /// Assigns one key from its textual value; unknown keys and malformed
  /// values raise ConfigError.
  void set(const std::string& key, const std::string& value);
  /// Reads `key = value` lines (# comments) or a JSON object (either a bare
  /// config or an artifact carrying a "config" member).
  void load_file(const std::string& path);
  void validate() const;

  SimConfig sim() const;
  nlohmann::json to_json() const;

  static const std::vector<std::string>& keys();
  /// key, default value and a one-line description, for --help.
  static std::string describe();
};

std::vector<std::string> split_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

}  // namespace wncs
