#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wncs/solver.hpp"

namespace wncs {

/// Downlink threshold surface x*(tau, b) plus the Idle/Uplink rule used
/// below it.
///
/// Thresholds are stored per (tau, b) and are +inf when the source table
/// never chose Downlink. The below rule is tabulated on the non-negative
/// nodes for every (tau, y, b) as the greedy choice among the admissible
/// non-Downlink actions.
struct ThresholdPolicy {
  int tau_max = 2;
  int B = 1;
  std::vector<double> nodes;
  std::vector<double> thresholds;
  std::vector<double> refined_thresholds;
  std::vector<Action> below_rule;
  std::string grid_ref;

  std::size_t cell(int tau, int b) const { return static_cast<std::size_t>(tau) * (B + 1) + b; }
  double x_star(int tau, int b) const { return thresholds[cell(tau, b)]; }
  double refined_x_star(int tau, int b) const { return refined_thresholds[cell(tau, b)]; }
  Action below(int tau, int y, int b, std::size_t node) const {
    return below_rule[((static_cast<std::size_t>(tau) * 2 + y) * (B + 1) + b) * nodes.size() + node];
  }

  /// Downlink iff y = 1 and |x| >= x*(tau, b); otherwise the below rule at
  /// the node nearest |x|. Ages beyond tau_max use the tau_max row.
  Action decide(const State& s) const;
};

struct UpsetViolation {
  int tau = 0;
  int b = 0;
  std::size_t node = 0;
};

/// Outcome of scanning one action sequence along ascending |x|.
struct ThresholdScan {
  double x_star = 0.0;
  std::size_t first_downlink = 0;
  bool has_downlink = false;
  std::vector<std::size_t> violating_nodes;
};

/// First Downlink node, and every non-Downlink node that follows one.
ThresholdScan scan_threshold(std::span<const double> nodes, std::span<const Action> actions);

struct ThresholdExtraction {
  std::optional<ThresholdPolicy> policy;
  std::vector<UpsetViolation> violations;

  bool ok() const { return policy.has_value(); }
};

/// Reads x*(tau, b) off the y = 1 slices of a solved table. Symmetric tables
/// are read on their non-negative half.
ThresholdExtraction extract_thresholds(const ValueTable& table);

struct CheckResult {
  bool pass = true;
  long violations = 0;
  double worst = 0.0;
  std::vector<std::string> notes;
};

/// Numerical structure checks. Each verifier fills in its own section.
struct StructureReport {
  std::optional<CheckResult> evenness;
  long evenness_action_mismatches = 0;
  std::optional<CheckResult> fold_equivalence;
  std::optional<CheckResult> monotone_x;
  std::optional<CheckResult> monotone_b;
  std::optional<CheckResult> upset;
  /// Up-set violation counts per (tau, b), row-major over b.
  std::vector<long> upset_per_cell;
  std::optional<CheckResult> c1;
  std::optional<CheckResult> c2;
  std::optional<CheckResult> dominance;

  bool all_pass() const;
  void merge(const StructureReport& other);
};

/// max |V(x) - V(-x)| over a symmetric table and agreement of the greedy
/// actions at +-x.
StructureReport verify_evenness(const ValueTable& table_orig, double tolerance);

/// Compares a symmetric solve with a folded one: V_orig(x) vs V_fold(|x|) and
/// greedy actions.
StructureReport verify_fold_equivalence(const ValueTable& table_orig, const ValueTable& table_fold,
                                        double tolerance);

/// Adjacent-pair checks: V non-decreasing in x, non-increasing in b.
StructureReport verify_monotonicity(const ValueTable& table_fold, double tolerance);

/// Up-set form of the Downlink region plus the two sufficient conditions:
/// Q(.;2) - Q(.;1) non-increasing in x (b > 0) and Q(.;2) - Q(.;0) staying
/// <= 0 once it gets there.
StructureReport verify_threshold_structure(const ValueTable& table_fold, double tolerance);

/// For every branch other than the post-control reset, checks that
/// row(x') . V >= row(x) . V - tolerance for all x' >= x. `values` uses the
/// ValueTable layout.
StructureReport verify_kernel_dominance(const Kernel& kernel, const std::vector<double>& values,
                                        double tolerance);

using DecisionRule = std::function<Action(const State&)>;

/// Full-line rule (x, tau, y, b) -> folded decision at (|x|, tau, y, b).
DecisionRule unfold_policy(const ThresholdPolicy& folded);

}  // namespace wncs
