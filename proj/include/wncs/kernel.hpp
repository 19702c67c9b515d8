#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wncs/model.hpp"

namespace wncs {

/// Uniform discretization of the plant state plus the age truncation cap.
///
/// Symmetric grids hold `n` (odd) nodes (i - m) * dx, i = 0..n-1, m = (n-1)/2,
/// so that node values are exact negatives of each other. Folded grids hold
/// the non-negative half j * dx, j = 0..m, with the same spacing.
struct Grid {
  std::vector<double> x_nodes;
  double dx = 0.0;
  double x_max = 0.0;
  int tau_max = 2;
  bool folded = false;

  std::size_t size() const { return x_nodes.size(); }
  /// Index of the node closest to x (clamped to the grid).
  std::size_t nearest(double x) const;
  /// Node index holding -x_nodes[i]; symmetric grids only.
  std::size_t mirror(std::size_t i) const { return size() - 1 - i; }
  /// Node index of 0 (the centre for symmetric grids, 0 for folded).
  std::size_t zero_index() const { return folded ? 0 : (size() - 1) / 2; }

  static Grid uniform(double x_max, std::size_t n_nodes, int tau_max, bool folded);
};

/// Builds the grid used for solving: x_max = multiplier * sqrt(max eps_tau)
/// over tau <= tau_max. `n_nodes` counts the symmetric nodes; folded grids
/// keep ceil(n_nodes / 2) of them.
Grid build_grid(const ModelParams& params, double x_max_multiplier, int n_nodes, int tau_max,
                bool folded);

/// Enumerates the discrete (tau, y, b) components. A slice is the set of grid
/// nodes sharing one (tau, y, b) triple.
struct SliceLayout {
  int tau_max = 2;
  int B = 1;

  std::size_t count() const { return static_cast<std::size_t>(tau_max + 1) * 2 * (B + 1); }
  std::size_t index(int tau, int y, int b) const {
    return (static_cast<std::size_t>(tau) * 2 + y) * (B + 1) + b;
  }
  int tau_of(std::size_t s) const { return static_cast<int>(s / (2 * (B + 1))); }
  int y_of(std::size_t s) const { return static_cast<int>((s / (B + 1)) % 2); }
  int b_of(std::size_t s) const { return static_cast<int>(s % (B + 1)); }
};

/// Discretized N(center, variance) over the grid: midpoint-rule weights,
/// tail mass beyond the outer cell edges lumped onto the boundary nodes, then
/// renormalized to sum to one. Symmetric grids only.
std::vector<double> gaussian_row(double center, double variance, const Grid& grid);

/// Folded counterpart of gaussian_row on a folded grid: weight at x_j >= 0 is
/// N(x_j) + N(-x_j), halved at x_j = 0 where the cell is half as wide.
std::vector<double> folded_gaussian_row(double center_abs, double variance, const Grid& grid);

/// Pushes a symmetric-grid row through x -> |x|.
std::vector<double> fold_row(std::span<const double> row, const Grid& symmetric);

/// Unnormalized Gaussian shapes used by the folded recursion.
struct FoldKernels {
  static double psi(double v, double z);
  static double varphi(double v, double s, double z);
};

/// Dense x-to-x transition matrix, row-major.
struct XMatrix {
  std::size_t n = 0;
  std::vector<double> data;
  /// Every row holds the same distribution (the post-control reset).
  bool identical_rows = false;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * n, n}; }
};

struct Branch {
  double weight = 0.0;
  std::size_t next_slice = 0;
  std::size_t matrix = 0;
};

/// Branch-factored transition operator of the discretized MDP.
///
/// For each slice and admissible action the next-state law is a mixture of
/// branches; each branch moves (tau, y, b) deterministically and the plant
/// node through one of the shared matrices.
struct Kernel {
  ModelParams params;
  Grid grid;
  SliceLayout layout;
  std::vector<XMatrix> matrices;
  /// branches[slice][action]; empty when the action is inadmissible.
  std::vector<std::array<std::vector<Branch>, kNumActions>> branches;

  bool admissible(std::size_t slice, Action u) const { return !branches[slice][index(u)].empty(); }
};

/// Matrix slot for the drift row N(a x_i, sigma2); resets follow at 1 + tau.
inline constexpr std::size_t kDriftMatrix = 0;
inline constexpr std::size_t reset_matrix(int tau) { return 1 + static_cast<std::size_t>(tau); }

Kernel build_kernel(const ModelParams& params, const Grid& grid);

/// Self-describing JSON artifact: header (params, grid, layout, decisions)
/// and flat row-major probability arrays.
void write_kernel(const Kernel& kernel, const std::string& path);
Kernel read_kernel(const std::string& path);

}  // namespace wncs
