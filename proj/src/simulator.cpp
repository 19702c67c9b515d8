#include "wncs/simulator.hpp"

#include "wncs/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace wncs {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string dump(const State& s, double xhat, int t, Action u) {
  std::ostringstream os;
  os << "inadmissible action " << to_string(u) << " at t=" << t << " (x=" << s.x << ", xhat=" << xhat
     << ", tau=" << s.tau << ", y=" << s.y << ", b=" << s.b << ")";
  return os.str();
}

}  // namespace

int default_horizon(double beta) {
  return static_cast<int>(std::ceil(std::log(1e-6) / std::log(beta)));
}

int resolved_horizon(const SimConfig& config, double beta) {
  return config.horizon > 0 ? config.horizon : default_horizon(beta);
}

RolloutStream RolloutStream::for_rollout(std::uint64_t seed, std::uint64_t rollout) {
  const std::uint64_t base = splitmix64(seed ^ splitmix64(rollout));
  RolloutStream s;
  s.dynamics.seed(splitmix64(base ^ 0x1ULL));
  s.decisions.seed(splitmix64(base ^ 0x2ULL));
  return s;
}

SchedulingPolicy SchedulingPolicy::from_rule(std::string name, DecisionRule rule) {
  return {std::move(name), [rule = std::move(rule)](const State& s, int, std::mt19937_64&) { return rule(s); }};
}

const std::vector<std::string>& baseline_names() {
  static const std::vector<std::string> names{"never_act", "periodic", "greedy_uplink", "random_admissible"};
  return names;
}

BaselineKind parse_baseline(const std::string& name) {
  if (name == "never_act") return BaselineKind::NeverAct;
  if (name == "periodic") return BaselineKind::Periodic;
  if (name == "greedy_uplink") return BaselineKind::GreedyUplink;
  if (name == "random_admissible") return BaselineKind::RandomAdmissible;
  throw ConfigError("unknown baseline '" + name +
                    "' (valid: never_act, periodic, greedy_uplink, random_admissible)");
}

SchedulingPolicy baseline_policy(BaselineKind kind, int period) {
  switch (kind) {
    case BaselineKind::NeverAct:
      return {"never_act", [](const State&, int, std::mt19937_64&) { return Action::Idle; }};
    case BaselineKind::Periodic: {
      if (period < 1) throw ConfigError("periodic baseline needs period >= 1");
      // One transmission slot every `period` steps, alternating uplink and
      // downlink slots.
      return {"periodic", [period](const State& s, int t, std::mt19937_64&) {
                if (t % period != 0) return Action::Idle;
                if ((t / period) % 2 == 0) return s.b > 0 ? Action::Uplink : Action::Idle;
                return s.y == 1 ? Action::Downlink : Action::Idle;
              }};
    }
    case BaselineKind::GreedyUplink:
      return {"greedy_uplink", [](const State& s, int, std::mt19937_64&) {
                if (s.y == 1) return Action::Downlink;
                if (s.b > 0) return Action::Uplink;
                return Action::Idle;
              }};
    case BaselineKind::RandomAdmissible:
      return {"random_admissible", [](const State& s, int, std::mt19937_64& rng) {
                const auto options = admissible_actions(s.y, s.b);
                std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
                return options[pick(rng)];
              }};
  }
  throw ConfigError("unknown baseline kind");
}

RolloutResult simulate_rollout(const SchedulingPolicy& policy, const ModelParams& params, const SimConfig& config,
                               RolloutStream& stream, const StepObserver& observer) {
  const int T = resolved_horizon(config, params.beta);
  if (T < 1) throw ConfigError("simulation horizon must be >= 1");
  const double p_up = params.uplink_drop();
  const double p_down = params.downlink_drop();
  const double sigma = std::sqrt(params.sigma2);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::discrete_distribution<int> harvest(params.harvest_probs.begin(), params.harvest_probs.end());

  State s;
  s.x = config.x0.mean + (config.x0.variance > 0.0 ? std::sqrt(config.x0.variance) * gauss(stream.dynamics) : 0.0);
  s.tau = 0;
  s.y = config.y0;
  s.b = config.b0 < 0 ? params.B : std::min(config.b0, params.B);
  double xhat = 0.0;
  double x_sample = 0.0;

  RolloutResult r;
  r.min_battery = s.b;
  r.max_battery = s.b;
  double discount = 1.0;
  long age_sum = 0;
  long battery_sum = 0;

  for (int t = 0; t < T; ++t) {
    const double stage = discount * s.x * s.x;
    r.discounted_cost += stage;

    const Action u = policy.decide(s, t, stream.decisions);
    if (!is_admissible(u, s.y, s.b)) throw InadmissibleAction(dump(s, xhat, t, u));
    ++r.action_counts[static_cast<std::size_t>(index(u))];
    age_sum += s.tau;
    battery_sum += s.b;

    const int ell = harvest(stream.dynamics);
    bool delivered = false;
    if (u == Action::Uplink) delivered = unit(stream.dynamics) >= p_up;
    if (u == Action::Downlink) delivered = unit(stream.dynamics) >= p_down;
    const double w = sigma * gauss(stream.dynamics);

    const double v = control_input(xhat, params.a, u, u == Action::Downlink && delivered);
    const double x_next = plant_step(s.x, params.a, v, w);

    if (observer) {
      observer({t, s.x, xhat, s.tau, s.y, s.b, u, delivered, stage, x_next, x_sample});
    }

    if (u == Action::Uplink && delivered) {
      ++r.uplink_deliveries;
      xhat = params.a * s.x;
      x_sample = s.x;
    } else {
      xhat = params.a * xhat;
    }
    if (u == Action::Downlink && delivered) ++r.downlink_deliveries;

    const int tau_next = tau_step(s.tau, u, u == Action::Uplink && delivered);
    const int y_next = y_step(s.y, u, delivered);
    const int b_next = battery_step(s.b, ell, u, params.B);
    s = State{x_next, tau_next, y_next, b_next};
    r.min_battery = std::min(r.min_battery, s.b);
    r.max_battery = std::max(r.max_battery, s.b);
    discount *= params.beta;
  }
  r.terminal_x2 = s.x * s.x;
  r.mean_age = static_cast<double>(age_sum) / T;
  r.mean_battery = static_cast<double>(battery_sum) / T;
  return r;
}

CostEstimate estimate_cost(const SchedulingPolicy& policy, const ModelParams& params, const SimConfig& config) {
  params.validate();
  if (config.n_rollouts < 1) throw ConfigError("n_rollouts must be >= 1");
  const long n = config.n_rollouts;
  std::vector<RolloutResult> results(static_cast<std::size_t>(n));
  const int threads = worker_count(config.threads);

  // Exceptions cannot cross the OpenMP region; keep the first one.
  std::string failure;
#pragma omp parallel for schedule(dynamic, 256) num_threads(threads)
  for (long k = 0; k < n; ++k) {
    try {
      auto stream = RolloutStream::for_rollout(config.seed, static_cast<std::uint64_t>(k));
      results[static_cast<std::size_t>(k)] = simulate_rollout(policy, params, config, stream);
    } catch (const std::exception& e) {
#pragma omp critical
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw InadmissibleAction(failure);

  CostEstimate est;
  est.policy = policy.name;
  est.n_rollouts = n;
  est.horizon = resolved_horizon(config, params.beta);

  double sum = 0.0;
  for (const auto& r : results) sum += r.discounted_cost;
  est.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& r : results) ss += (r.discounted_cost - est.mean) * (r.discounted_cost - est.mean);
  est.standard_error = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;

  double terminal = 0.0;
  std::array<long, kNumActions> counts{};
  long up_ok = 0;
  long down_ok = 0;
  double age = 0.0;
  double battery = 0.0;
  for (const auto& r : results) {
    terminal += r.terminal_x2;
    for (std::size_t u = 0; u < counts.size(); ++u) counts[u] += r.action_counts[u];
    up_ok += r.uplink_deliveries;
    down_ok += r.downlink_deliveries;
    age += r.mean_age;
    battery += r.mean_battery;
  }
  const double steps = static_cast<double>(n) * est.horizon;
  for (std::size_t u = 0; u < counts.size(); ++u) est.action_fractions[u] = static_cast<double>(counts[u]) / steps;
  est.uplink_success_rate = counts[1] > 0 ? static_cast<double>(up_ok) / static_cast<double>(counts[1]) : 0.0;
  est.downlink_success_rate = counts[2] > 0 ? static_cast<double>(down_ok) / static_cast<double>(counts[2]) : 0.0;
  est.mean_age = age / static_cast<double>(n);
  est.mean_battery = battery / static_cast<double>(n);

  double proxy = terminal / static_cast<double>(n);
  if (std::abs(params.a) < 1.0) proxy = std::max(proxy, params.sigma2 / (1.0 - params.a * params.a));
  est.truncation_bound = std::pow(params.beta, est.horizon) * proxy / (1.0 - params.beta);
  return est;
}

}  // namespace wncs
