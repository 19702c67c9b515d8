#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "wncs/model.hpp"
#include "wncs/policy.hpp"

namespace wncs {

/// Initial plant state law: x(0) ~ N(mean, variance), a point mass when
/// variance == 0.
struct InitialState {
  double mean = 0.0;
  double variance = 1.0;
};

struct SimConfig {
  /// Truncation of the infinite discounted sum; 0 selects default_horizon().
  int horizon = 0;
  long n_rollouts = 1000;
  std::uint64_t seed = 1;
  InitialState x0;
  int y0 = 0;
  /// Initial battery; negative means full (B).
  int b0 = -1;
  int threads = 0;
};

/// Smallest T with beta^T <= 1e-6.
int default_horizon(double beta);
int resolved_horizon(const SimConfig& config, double beta);

/// Independent random streams of one rollout, derived from (seed, index)
/// only, so results do not depend on execution order.
struct RolloutStream {
  std::mt19937_64 dynamics;
  std::mt19937_64 decisions;

  static RolloutStream for_rollout(std::uint64_t seed, std::uint64_t rollout);
};

/// A scheduler as seen by the simulator. `decide` may use the decision
/// stream (randomized baselines) and the time index (periodic baselines).
struct SchedulingPolicy {
  std::string name;
  std::function<Action(const State&, int t, std::mt19937_64& rng)> decide;

  static SchedulingPolicy from_rule(std::string name, DecisionRule rule);
};

enum class BaselineKind { NeverAct, Periodic, GreedyUplink, RandomAdmissible };

SchedulingPolicy baseline_policy(BaselineKind kind, int period = 1);
/// Parses never_act, periodic, greedy_uplink, random_admissible.
BaselineKind parse_baseline(const std::string& name);
const std::vector<std::string>& baseline_names();

struct StepRecord {
  int t = 0;
  double x = 0.0;
  double xhat = 0.0;
  int tau = 0;
  int y = 0;
  int b = 0;
  Action u = Action::Idle;
  bool delivered = false;
  /// Discounted stage cost beta^t x(t)^2.
  double cost = 0.0;
  double x_next = 0.0;
  /// Plant state at the sample time of the controller's packet.
  double x_at_sample = 0.0;
};

using StepObserver = std::function<void(const StepRecord&)>;

struct RolloutResult {
  double discounted_cost = 0.0;
  std::array<long, kNumActions> action_counts{};
  long uplink_deliveries = 0;
  long downlink_deliveries = 0;
  double mean_age = 0.0;
  double mean_battery = 0.0;
  int min_battery = 0;
  int max_battery = 0;
  double terminal_x2 = 0.0;
};

/// Runs the continuous-state closed loop for the configured horizon.
/// Throws InadmissibleAction (with a state dump) if the policy picks an
/// unavailable action.
RolloutResult simulate_rollout(const SchedulingPolicy& policy, const ModelParams& params,
                               const SimConfig& config, RolloutStream& stream,
                               const StepObserver& observer = {});

struct CostEstimate {
  std::string policy;
  double mean = 0.0;
  double standard_error = 0.0;
  double truncation_bound = 0.0;
  long n_rollouts = 0;
  int horizon = 0;
  std::array<double, kNumActions> action_fractions{};
  double uplink_success_rate = 0.0;
  double downlink_success_rate = 0.0;
  double mean_age = 0.0;
  double mean_battery = 0.0;
};

/// Mean and standard error of the discounted cost over independent
/// rollouts. Rollouts run in parallel; the reduction is in rollout order.
CostEstimate estimate_cost(const SchedulingPolicy& policy, const ModelParams& params, const SimConfig& config);

}  // namespace wncs
