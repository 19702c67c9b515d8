#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wncs/config.hpp"
#include "wncs/policy.hpp"
#include "wncs/simulator.hpp"
#include "wncs/solver.hpp"

namespace wncs {

/// Resolved config as embedded in artifacts. Keys that do not affect
/// results (thread count, output directory) are left out so artifacts from
/// serial and parallel runs compare equal.
nlohmann::json artifact_config(const RunConfig& config);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

/// Columns: x, tau, y, b, V, Q_idle, Q_uplink, Q_downlink, action.
/// Inadmissible Q entries are written as "inf".
void write_value_table_csv(const ValueTable& table, const std::string& path);
/// Rebuilds a table from its CSV; the grid and layout are inferred from the
/// rows. Throws ConfigError on malformed files.
ValueTable read_value_table_csv(const std::string& path);
/// Throws ConfigError unless the table lives on the kernel's grid/layout.
void check_table_matches(const ValueTable& table, const Kernel& kernel);
/// Non-negative half of a symmetric table, relabelled as a folded table.
ValueTable fold_view(const ValueTable& symmetric);

nlohmann::json value_table_json(const ValueTable& table, const RunConfig& config);

/// Columns: tau, b, x_star, refined_x_star.
void write_thresholds_csv(const ThresholdPolicy& policy, const std::string& path);
nlohmann::json thresholds_json(const ThresholdPolicy& policy, const RunConfig& config);
ThresholdPolicy threshold_policy_from_json(const nlohmann::json& j);
/// Accepts thresholds.json, or thresholds.csv next to the value_table.csv
/// that supplies the below-threshold rule.
ThresholdPolicy read_threshold_policy(const std::string& path);

nlohmann::json solve_report_json(const SolveReport& report, const ValueTable& table, const RunConfig& config);
nlohmann::json structure_report_json(const StructureReport& report, const RunConfig& config);

/// One row per policy: mean, se and diagnostics.
void write_results_csv(const std::vector<CostEstimate>& rows, const RunConfig& config, const std::string& path);
nlohmann::json results_json(const std::vector<CostEstimate>& rows, const RunConfig& config);

void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, long rollout, const StepRecord& r);

/// Summary trends of x*(tau, b): counts of increasing / decreasing steps
/// along tau and along b (finite thresholds only).
nlohmann::json threshold_trends(const ThresholdPolicy& policy);

}  // namespace wncs
