#include "wncs/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wncs {

const char* to_string(Action u) {
  switch (u) {
    case Action::Idle:
      return "idle";
    case Action::Uplink:
      return "uplink";
    case Action::Downlink:
      return "downlink";
  }
  return "?";
}

void ModelParams::validate() const {
  auto prob = [](double q) { return q >= 0.0 && q <= 1.0; };
  if (!std::isfinite(a)) throw ConfigError("a must be finite");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ConfigError("sigma2 must be > 0");
  if (!prob(p)) throw ConfigError("p must lie in [0, 1]");
  if (p_up >= 0.0 && !prob(p_up)) throw ConfigError("p_up must lie in [0, 1]");
  if (p_down >= 0.0 && !prob(p_down)) throw ConfigError("p_down must lie in [0, 1]");
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
  if (B < 1) throw ConfigError("B must be >= 1");
  if (harvest_probs.empty()) throw ConfigError("harvest_probs must not be empty");
  for (double q : harvest_probs) {
    if (!(q >= 0.0)) throw ConfigError("harvest_probs entries must be >= 0");
  }
  const double total = std::accumulate(harvest_probs.begin(), harvest_probs.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("harvest_probs must sum to 1");
}

std::vector<Action> admissible_actions(int y, int b) {
  std::vector<Action> out{Action::Idle};
  if (b > 0) out.push_back(Action::Uplink);
  if (y == 1) out.push_back(Action::Downlink);
  return out;
}

bool is_admissible(Action u, int y, int b) {
  switch (u) {
    case Action::Idle:
      return true;
    case Action::Uplink:
      return b > 0;
    case Action::Downlink:
      return y == 1;
  }
  return false;
}

int battery_step(int b, int ell, Action u, int B) {
  if (u == Action::Uplink && b <= 0) {
    throw InadmissibleAction("uplink with empty battery");
  }
  const int spent = u == Action::Uplink ? 1 : 0;
  return std::min(b + ell - spent, B);
}

int tau_step(int tau, Action u, bool uplink_delivered) {
  if (u == Action::Uplink && uplink_delivered) return 1;
  return tau + 1;
}

int y_step(int y, Action u, bool delivered) {
  if (u == Action::Downlink && y != 1) {
    throw InadmissibleAction("downlink without a control packet");
  }
  if (!delivered) return y;
  if (u == Action::Downlink) return 0;
  if (u == Action::Uplink) return 1;
  return y;
}

double control_input(double xhat, double a, Action u, bool downlink_delivered) {
  if (u == Action::Downlink && downlink_delivered) return -a * xhat;
  return 0.0;
}

double plant_step(double x, double a, double v, double w) { return a * x + v + w; }

double eps_tau(int tau, double a, double sigma2) {
  if (tau < 0) throw DomainError("eps_tau: tau must be >= 0");
  const double a2 = a * a;
  if (a2 == 1.0) return sigma2 * static_cast<double>(tau + 1);
  return sigma2 * (1.0 - std::pow(a2, tau + 1)) / (1.0 - a2);
}

}  // namespace wncs
