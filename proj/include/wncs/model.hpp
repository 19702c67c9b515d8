#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wncs {

/// Raised for invalid parameters, grids or configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numeric argument lies outside the domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a scheduler picks an action that is not available in the
/// current (y, b) state.
class InadmissibleAction : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when arrays handed to an operation disagree in shape.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Action : std::uint8_t { Idle = 0, Uplink = 1, Downlink = 2 };

inline constexpr int kNumActions = 3;

constexpr int index(Action u) { return static_cast<int>(u); }
const char* to_string(Action u);

/// Plant, channel and battery parameters of the scheduling problem.
///
/// The controller gain is not stored: it is always -a (one-step
/// controllable deadbeat gain). Both channels default to the shared drop
/// probability `p`; `p_up` / `p_down` override it per channel when set.
struct ModelParams {
  double a = 0.8;
  double sigma2 = 1.0;
  double p = 0.2;
  double p_up = -1.0;
  double p_down = -1.0;
  double beta = 0.9;
  int B = 3;
  /// Probability of harvesting l units, l = 0..L.
  std::vector<double> harvest_probs{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  double K() const { return -a; }
  double uplink_drop() const { return p_up >= 0.0 ? p_up : p; }
  double downlink_drop() const { return p_down >= 0.0 ? p_down : p; }
  int max_harvest() const { return static_cast<int>(harvest_probs.size()) - 1; }

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

struct State {
  double x = 0.0;
  int tau = 0;
  int y = 0;
  int b = 0;
};

struct EstimatorState {
  double xhat = 0.0;
};

/// Actions in ascending index order.
std::vector<Action> admissible_actions(int y, int b);
bool is_admissible(Action u, int y, int b);

int battery_step(int b, int ell, Action u, int B);
int tau_step(int tau, Action u, bool uplink_delivered);
int y_step(int y, Action u, bool delivered);
double control_input(double xhat, double a, Action u, bool downlink_delivered);
double plant_step(double x, double a, double v, double w);

/// Variance of the plant state one step after a delivered control packet
/// of age tau: sigma2 * sum_{k=0}^{tau} a^{2k}.
double eps_tau(int tau, double a, double sigma2);

}  // namespace wncs
