#include "wncs/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wncs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Indices of the nodes with x >= 0, ascending.
std::vector<std::size_t> nonnegative_nodes(const Grid& grid) {
  std::vector<std::size_t> idx;
  for (std::size_t i = grid.folded ? 0 : grid.zero_index(); i < grid.size(); ++i) idx.push_back(i);
  return idx;
}

void note_violation(CheckResult& r, double magnitude) {
  ++r.violations;
  r.worst = std::max(r.worst, magnitude);
  r.pass = false;
}

Action below_choice(const ValueTable& t, std::size_t s, std::size_t i) {
  const double q[kNumActions] = {t.q(s, Action::Idle, i), t.q(s, Action::Uplink, i), kInf};
  return greedy_action(q);
}

void require_folded(const ValueTable& t, const char* who) {
  if (!t.grid.folded) throw ContractViolation(std::string(who) + " expects a folded-grid table");
}

}  // namespace

Action ThresholdPolicy::decide(const State& s) const {
  const int tau = std::clamp(s.tau, 0, tau_max);
  const int b = std::clamp(s.b, 0, B);
  const double mag = std::abs(s.x);
  if (s.y == 1 && mag >= x_star(tau, b)) return Action::Downlink;
  std::size_t node = 0;
  if (nodes.size() > 1) {
    const double k = std::round(mag / (nodes[1] - nodes[0]));
    node = std::min(static_cast<std::size_t>(k), nodes.size() - 1);
  }
  return below(tau, s.y == 1 ? 1 : 0, b, node);
}

ThresholdScan scan_threshold(std::span<const double> nodes, std::span<const Action> actions) {
  ThresholdScan scan;
  scan.x_star = kInf;
  for (std::size_t k = 0; k < actions.size(); ++k) {
    if (actions[k] == Action::Downlink) {
      if (!scan.has_downlink) {
        scan.has_downlink = true;
        scan.first_downlink = k;
        scan.x_star = nodes[k];
      }
    } else if (scan.has_downlink) {
      scan.violating_nodes.push_back(k);
    }
  }
  return scan;
}

ThresholdExtraction extract_thresholds(const ValueTable& table) {
  const auto idx = nonnegative_nodes(table.grid);
  const SliceLayout& L = table.layout;
  ThresholdPolicy pol;
  pol.tau_max = L.tau_max;
  pol.B = L.B;
  for (auto i : idx) pol.nodes.push_back(std::abs(table.grid.x_nodes[i]));
  pol.grid_ref = std::string(table.grid.folded ? "folded" : "symmetric") + " grid, " +
                 std::to_string(table.grid.size()) + " nodes, x_max " + std::to_string(table.grid.x_max) +
                 ", tau_max " + std::to_string(table.grid.tau_max) + ", " +
                 std::to_string(table.iteration_count) + " iterations";
  pol.thresholds.assign(static_cast<std::size_t>(L.tau_max + 1) * (L.B + 1), kInf);
  pol.refined_thresholds = pol.thresholds;

  ThresholdExtraction out;
  std::vector<Action> actions(idx.size());
  for (int tau = 0; tau <= L.tau_max; ++tau) {
    for (int b = 0; b <= L.B; ++b) {
      const std::size_t s = L.index(tau, 1, b);
      for (std::size_t k = 0; k < idx.size(); ++k) actions[k] = table.action(s, idx[k]);
      const auto scan = scan_threshold(pol.nodes, actions);
      for (auto k : scan.violating_nodes) out.violations.push_back({tau, b, k});
      if (!scan.has_downlink) continue;

      pol.thresholds[pol.cell(tau, b)] = scan.x_star;
      const std::size_t k = scan.first_downlink;
      double refined = scan.x_star;
      if (k > 0) {
        auto gap = [&](std::size_t kk) {
          const std::size_t i = idx[kk];
          return table.q(s, Action::Downlink, i) -
                 std::min(table.q(s, Action::Idle, i), table.q(s, Action::Uplink, i));
        };
        const double before = gap(k - 1);
        const double at = gap(k);
        if (before > 0.0 && at <= 0.0 && before - at > 0.0) {
          refined = pol.nodes[k - 1] + before / (before - at) * (pol.nodes[k] - pol.nodes[k - 1]);
        }
      }
      pol.refined_thresholds[pol.cell(tau, b)] = refined;
    }
  }

  pol.below_rule.resize(L.count() * idx.size());
  for (std::size_t s = 0; s < L.count(); ++s) {
    for (std::size_t k = 0; k < idx.size(); ++k) pol.below_rule[s * idx.size() + k] = below_choice(table, s, idx[k]);
  }

  if (out.violations.empty()) out.policy = std::move(pol);
  return out;
}

bool StructureReport::all_pass() const {
  for (const auto* c : {&evenness, &fold_equivalence, &monotone_x, &monotone_b, &upset, &c1, &c2, &dominance}) {
    if (c->has_value() && !(*c)->pass) return false;
  }
  return true;
}

void StructureReport::merge(const StructureReport& o) {
  auto take = [](std::optional<CheckResult>& dst, const std::optional<CheckResult>& src) {
    if (src) dst = src;
  };
  take(evenness, o.evenness);
  if (o.evenness) evenness_action_mismatches = o.evenness_action_mismatches;
  take(fold_equivalence, o.fold_equivalence);
  take(monotone_x, o.monotone_x);
  take(monotone_b, o.monotone_b);
  take(upset, o.upset);
  if (o.upset) upset_per_cell = o.upset_per_cell;
  take(c1, o.c1);
  take(c2, o.c2);
  take(dominance, o.dominance);
}

StructureReport verify_evenness(const ValueTable& t, double tolerance) {
  if (t.grid.folded) throw ContractViolation("verify_evenness expects a symmetric-grid table");
  CheckResult r;
  long mismatches = 0;
  const std::size_t n = t.n();
  for (std::size_t s = 0; s < t.layout.count(); ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t m = t.grid.mirror(i);
      r.worst = std::max(r.worst, std::abs(t.v(s, i) - t.v(s, m)));
      if (t.action(s, i) != t.action(s, m)) ++mismatches;
    }
  }
  // Each mismatching pair is visited twice.
  mismatches /= 2;
  r.violations = mismatches;
  r.pass = r.worst <= tolerance && mismatches == 0;
  if (r.worst > tolerance) r.notes.push_back("value deviation above tolerance");
  StructureReport rep;
  rep.evenness = r;
  rep.evenness_action_mismatches = mismatches;
  return rep;
}

StructureReport verify_fold_equivalence(const ValueTable& orig, const ValueTable& fold, double tolerance) {
  if (orig.grid.folded || !fold.grid.folded) {
    throw ContractViolation("verify_fold_equivalence expects (symmetric, folded) tables");
  }
  if (fold.n() != orig.grid.zero_index() + 1 || orig.layout.count() != fold.layout.count()) {
    throw ContractViolation("verify_fold_equivalence: grids do not correspond");
  }
  CheckResult r;
  long mismatches = 0;
  const std::size_t zero = orig.grid.zero_index();
  for (std::size_t s = 0; s < orig.layout.count(); ++s) {
    for (std::size_t i = 0; i < orig.n(); ++i) {
      const std::size_t j = i >= zero ? i - zero : zero - i;
      r.worst = std::max(r.worst, std::abs(orig.v(s, i) - fold.v(s, j)));
      if (orig.action(s, i) != fold.action(s, j)) ++mismatches;
    }
  }
  r.violations = mismatches;
  r.pass = r.worst <= tolerance && mismatches == 0;
  if (mismatches > 0) r.notes.push_back(std::to_string(mismatches) + " greedy action mismatches");
  StructureReport rep;
  rep.fold_equivalence = r;
  return rep;
}

StructureReport verify_monotonicity(const ValueTable& t, double tolerance) {
  require_folded(t, "verify_monotonicity");
  CheckResult in_x;
  CheckResult in_b;
  const SliceLayout& L = t.layout;
  const std::size_t n = t.n();
  for (std::size_t s = 0; s < L.count(); ++s) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double drop = t.v(s, i) - t.v(s, i + 1);
      if (drop > tolerance) note_violation(in_x, drop);
    }
    if (L.b_of(s) < L.B) {
      const std::size_t up = L.index(L.tau_of(s), L.y_of(s), L.b_of(s) + 1);
      for (std::size_t i = 0; i < n; ++i) {
        const double rise = t.v(up, i) - t.v(s, i);
        if (rise > tolerance) note_violation(in_b, rise);
      }
    }
  }
  StructureReport rep;
  rep.monotone_x = in_x;
  rep.monotone_b = in_b;
  return rep;
}

StructureReport verify_threshold_structure(const ValueTable& t, double tolerance) {
  require_folded(t, "verify_threshold_structure");
  const SliceLayout& L = t.layout;
  const std::size_t n = t.n();
  CheckResult upset;
  CheckResult c1;
  CheckResult c2;
  StructureReport rep;
  rep.upset_per_cell.assign(static_cast<std::size_t>(L.tau_max + 1) * (L.B + 1), 0);
  std::vector<Action> actions(n);

  for (int tau = 0; tau <= L.tau_max; ++tau) {
    for (int b = 0; b <= L.B; ++b) {
      const std::size_t s = L.index(tau, 1, b);
      for (std::size_t i = 0; i < n; ++i) actions[i] = t.action(s, i);
      const auto scan = scan_threshold(t.grid.x_nodes, actions);
      const auto bad = static_cast<long>(scan.violating_nodes.size());
      rep.upset_per_cell[static_cast<std::size_t>(tau) * (L.B + 1) + b] = bad;
      if (bad > 0) {
        upset.violations += bad;
        upset.pass = false;
        upset.worst = std::max(upset.worst, static_cast<double>(bad));
      }

      if (b > 0) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
          const double g0 = t.q(s, Action::Downlink, i) - t.q(s, Action::Uplink, i);
          const double g1 = t.q(s, Action::Downlink, i + 1) - t.q(s, Action::Uplink, i + 1);
          if (g1 - g0 > tolerance) note_violation(c1, g1 - g0);
        }
      }

      bool reached = false;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = t.q(s, Action::Downlink, i) - t.q(s, Action::Idle, i);
        if (reached && d > tolerance) note_violation(c2, d);
        if (d <= 0.0) reached = true;
      }
    }
  }
  rep.upset = upset;
  rep.c1 = c1;
  rep.c2 = c2;
  return rep;
}

StructureReport verify_kernel_dominance(const Kernel& kernel, const std::vector<double>& values,
                                        double tolerance) {
  const std::size_t n = kernel.grid.size();
  if (values.size() != kernel.layout.count() * n) {
    throw ContractViolation("verify_kernel_dominance: value array does not match the kernel");
  }
  const auto idx = nonnegative_nodes(kernel.grid);
  std::vector<char> seen(kernel.matrices.size() * kernel.layout.count(), 0);
  CheckResult r;
  for (const auto& per_slice : kernel.branches) {
    for (int u = 0; u < kNumActions; ++u) {
      for (const auto& br : per_slice[static_cast<std::size_t>(u)]) {
        // The post-control reset does not depend on x.
        if (br.matrix != kDriftMatrix) continue;
        char& flag = seen[br.matrix * kernel.layout.count() + br.next_slice];
        if (flag) continue;
        flag = 1;
        const XMatrix& mat = kernel.matrices[br.matrix];
        const double* v = values.data() + br.next_slice * n;
        double running_max = -kInf;
        for (auto i : idx) {
          const auto row = mat.row(i);
          double e = 0.0;
          for (std::size_t j = 0; j < n; ++j) e += row[j] * v[j];
          if (e < running_max - tolerance) note_violation(r, running_max - e);
          running_max = std::max(running_max, e);
        }
      }
    }
  }
  StructureReport rep;
  rep.dominance = r;
  return rep;
}

DecisionRule unfold_policy(const ThresholdPolicy& folded) {
  return [pol = folded](const State& s) { return pol.decide(s); };
}

}  // namespace wncs
