#include "wncs/solver.hpp"

#include "wncs/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace wncs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(std::span<const double> row, const double* v) {
  double acc = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * v[j];
  return acc;
}

void check_shapes(const std::vector<double>& values, const Kernel& kernel) {
  const std::size_t n = kernel.grid.size();
  if (values.size() != kernel.layout.count() * n) {
    throw ContractViolation("value array does not match the kernel's state space");
  }
  for (const auto& m : kernel.matrices) {
    if (m.n != n || m.data.size() != n * n) throw ContractViolation("kernel matrix does not match the grid");
  }
}

// Precomputed (matrix, next slice) products M * V_slice shared by all
// branches that reference them.
class ContinuationCache {
 public:
  explicit ContinuationCache(const Kernel& kernel)
      : kernel_(kernel), n_(kernel.grid.size()), slot_(kernel.matrices.size() * kernel.layout.count(), -1) {
    for (const auto& per_slice : kernel.branches) {
      for (const auto& per_action : per_slice) {
        for (const auto& br : per_action) {
          auto& s = slot_[key(br.matrix, br.next_slice)];
          if (s < 0) {
            s = static_cast<long>(entries_.size());
            entries_.push_back({br.matrix, br.next_slice});
          }
        }
      }
    }
    values_.assign(entries_.size() * n_, 0.0);
  }

  void refresh(const std::vector<double>& V, int threads) {
    const long count = static_cast<long>(entries_.size());
#pragma omp parallel for schedule(static) num_threads(threads)
    for (long e = 0; e < count; ++e) {
      const auto [m, slice] = entries_[static_cast<std::size_t>(e)];
      const XMatrix& mat = kernel_.matrices[m];
      const double* v = V.data() + slice * n_;
      double* out = values_.data() + static_cast<std::size_t>(e) * n_;
      if (mat.identical_rows) {
        std::fill(out, out + n_, dot(mat.row(0), v));
      } else {
        for (std::size_t i = 0; i < n_; ++i) out[i] = dot(mat.row(i), v);
      }
    }
  }

  const double* get(std::size_t matrix, std::size_t slice) const {
    return values_.data() + static_cast<std::size_t>(slot_[key(matrix, slice)]) * n_;
  }

 private:
  std::size_t key(std::size_t matrix, std::size_t slice) const {
    return matrix * kernel_.layout.count() + slice;
  }

  const Kernel& kernel_;
  std::size_t n_;
  std::vector<long> slot_;
  std::vector<std::pair<std::size_t, std::size_t>> entries_;
  std::vector<double> values_;
};

// Fills Q, V and policy of `out` from the cached continuations.
void backup_into(ValueTable& out, const Kernel& kernel, const ContinuationCache& cache, double beta,
                 int threads) {
  const std::size_t n = kernel.grid.size();
  const long slices = static_cast<long>(kernel.layout.count());
#pragma omp parallel for schedule(static) num_threads(threads)
  for (long sl = 0; sl < slices; ++sl) {
    const auto s = static_cast<std::size_t>(sl);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = kernel.grid.x_nodes[i];
      double q[kNumActions];
      for (int u = 0; u < kNumActions; ++u) {
        const auto& brs = kernel.branches[s][static_cast<std::size_t>(u)];
        if (brs.empty()) {
          q[u] = kInf;
        } else {
          double acc = 0.0;
          for (const auto& br : brs) acc += br.weight * cache.get(br.matrix, br.next_slice)[i];
          q[u] = x * x + beta * acc;
        }
        out.Q[(s * kNumActions + static_cast<std::size_t>(u)) * n + i] = q[u];
      }
      const Action best = greedy_action(q);
      out.policy[s * n + i] = best;
      out.V[s * n + i] = std::min({q[0], q[1], q[2]});
    }
  }
}

}  // namespace

ValueTable ValueTable::zeros(const Kernel& kernel) {
  ValueTable t;
  t.grid = kernel.grid;
  t.layout = kernel.layout;
  const std::size_t n = kernel.grid.size();
  const std::size_t slices = kernel.layout.count();
  t.V.assign(slices * n, 0.0);
  t.Q.assign(slices * kNumActions * n, 0.0);
  t.policy.assign(slices * n, Action::Idle);
  for (std::size_t s = 0; s < slices; ++s) {
    for (int u = 0; u < kNumActions; ++u) {
      if (!kernel.admissible(s, static_cast<Action>(u))) {
        std::fill_n(t.Q.begin() + static_cast<long>((s * kNumActions + static_cast<std::size_t>(u)) * n),
                    n, kInf);
      }
    }
  }
  return t;
}

Action greedy_action(const double (&q)[kNumActions]) {
  const double best = std::min({q[0], q[1], q[2]});
  const double slack = kTieRelTol * std::max(1.0, std::abs(best));
  for (int u = 0; u < kNumActions; ++u) {
    if (q[u] <= best + slack) return static_cast<Action>(u);
  }
  return Action::Idle;
}

ValueTable bellman_backup(const std::vector<double>& values, const Kernel& kernel, const ModelParams& params,
                          int threads) {
  check_shapes(values, kernel);
  threads = worker_count(threads);
  ContinuationCache cache(kernel);
  cache.refresh(values, threads);
  ValueTable out = ValueTable::zeros(kernel);
  backup_into(out, kernel, cache, params.beta, threads);
  return out;
}

std::pair<ValueTable, SolveReport> value_iteration(const Kernel& kernel, const ModelParams& params, double tol,
                                                   int max_iter, int threads) {
  if (!(tol > 0.0)) throw ConfigError("value_iteration: tol must be > 0");
  if (max_iter < 0) throw ConfigError("value_iteration: max_iter must be >= 0");
  const auto start = std::chrono::steady_clock::now();
  threads = worker_count(threads);

  SolveReport report;
  const bool unstable = params.beta * params.a * params.a >= 1.0;
  if (unstable) {
    report.warnings.push_back("beta * a^2 >= 1: finite cost is not guaranteed; watching residual contraction");
  }

  ValueTable current = ValueTable::zeros(kernel);
  ValueTable next = ValueTable::zeros(kernel);
  check_shapes(current.V, kernel);
  ContinuationCache cache(kernel);
  int growth_streak = 0;

  for (int it = 1; it <= max_iter; ++it) {
    cache.refresh(current.V, threads);
    backup_into(next, kernel, cache, params.beta, threads);

    double residual = 0.0;
    for (std::size_t k = 0; k < next.V.size(); ++k) {
      residual = std::max(residual, std::abs(next.V[k] - current.V[k]));
    }
    if (!report.residual_history.empty()) {
      const double prev = report.residual_history.back();
      report.contraction_estimates.push_back(prev > 0.0 ? residual / prev : 0.0);
      growth_streak = residual > prev ? growth_streak + 1 : 0;
    }
    report.residual_history.push_back(residual);
    std::swap(current, next);
    current.iteration_count = it;
    current.final_residual = residual;

    if (residual < tol) {
      report.converged = true;
      break;
    }
    if (!std::isfinite(residual) || growth_streak >= 50) {
      report.diverged = true;
      report.warnings.push_back("residual grew for 50 consecutive iterations; aborting (iteration " +
                                std::to_string(it) + ", residual " + std::to_string(residual) + ")");
      break;
    }
  }

  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(current), std::move(report)};
}

ValueTable finite_horizon_dp(const Kernel& kernel, const ModelParams& params, int horizon) {
  if (horizon < 0) throw ConfigError("finite_horizon_dp: horizon must be >= 0");
  const std::size_t n = kernel.grid.size();
  const std::size_t slices = kernel.layout.count();
  ValueTable table = ValueTable::zeros(kernel);
  std::vector<double> prev(slices * n, 0.0);

  for (int step = 1; step <= horizon; ++step) {
    for (std::size_t s = 0; s < slices; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        const double x = kernel.grid.x_nodes[i];
        double q[kNumActions] = {kInf, kInf, kInf};
        for (int u = 0; u < kNumActions; ++u) {
          const auto& brs = kernel.branches[s][static_cast<std::size_t>(u)];
          if (brs.empty()) continue;
          double acc = 0.0;
          for (const auto& br : brs) {
            const auto row = kernel.matrices[br.matrix].row(i);
            double expected = 0.0;
            for (std::size_t j = 0; j < n; ++j) expected += row[j] * prev[br.next_slice * n + j];
            acc += br.weight * expected;
          }
          q[u] = x * x + params.beta * acc;
        }
        for (int u = 0; u < kNumActions; ++u) {
          table.Q[(s * kNumActions + static_cast<std::size_t>(u)) * n + i] = q[u];
        }
        table.V[s * n + i] = std::min({q[0], q[1], q[2]});
        table.policy[s * n + i] = greedy_action(q);
      }
    }
    prev = table.V;
  }
  table.iteration_count = horizon;
  return table;
}

}  // namespace wncs
