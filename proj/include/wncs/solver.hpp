#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "wncs/kernel.hpp"

namespace wncs {

/// Value function, Q-factors and greedy policy over the discretized states.
///
/// Storage is slice-major: V[slice * n + i], Q[(slice * 3 + u) * n + i].
/// Q of an inadmissible action is +inf.
struct ValueTable {
  Grid grid;
  SliceLayout layout;
  std::vector<double> V;
  std::vector<double> Q;
  std::vector<Action> policy;
  int iteration_count = 0;
  double final_residual = 0.0;

  std::size_t n() const { return grid.size(); }
  double v(std::size_t slice, std::size_t i) const { return V[slice * n() + i]; }
  double q(std::size_t slice, Action u, std::size_t i) const {
    return Q[(slice * kNumActions + index(u)) * n() + i];
  }
  Action action(std::size_t slice, std::size_t i) const { return policy[slice * n() + i]; }

  static ValueTable zeros(const Kernel& kernel);
};

struct SolveReport {
  bool converged = false;
  bool diverged = false;
  std::vector<double> residual_history;
  std::vector<double> contraction_estimates;
  double wall_time = 0.0;
  std::vector<std::string> warnings;
};

/// Relative tolerance under which two Q-factors count as tied; ties go to
/// the lowest action index (Idle < Uplink < Downlink).
inline constexpr double kTieRelTol = 1e-12;

/// Lowest-index action among those within the tie tolerance of the minimum.
/// `q` holds one entry per action, +inf when inadmissible.
Action greedy_action(const double (&q)[kNumActions]);

/// One synchronous Bellman backup T(V). `values` has layout.count() * n
/// entries. `threads` <= 0 selects the OpenMP default.
ValueTable bellman_backup(const std::vector<double>& values, const Kernel& kernel,
                          const ModelParams& params, int threads = 0);

/// Jacobi value iteration from V_0 = 0 until the sup-norm update drops
/// below `tol` or `max_iter` backups have run.
std::pair<ValueTable, SolveReport> value_iteration(const Kernel& kernel, const ModelParams& params,
                                                   double tol, int max_iter, int threads = 0);

/// N-th value iterate by the plain recursion, one dot product per
/// (state, branch). Serves as an oracle for value_iteration.
ValueTable finite_horizon_dp(const Kernel& kernel, const ModelParams& params, int horizon);

}  // namespace wncs
