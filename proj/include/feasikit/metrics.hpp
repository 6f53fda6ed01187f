#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "feasikit/common.hpp"

namespace feasikit::metrics {

// One scored (task, agent) run: ground-truth label y, agent decision y-hat,
// completion flag s, and the token cost through the termination decision.
struct EvaluationRecord {
  std::string task_id;
  std::string dataset_id;
  std::string agent_id;
  Feasibility label = Feasibility::feasible;
  Feasibility decision = Feasibility::feasible;
  bool success = false;
  long long token_cost = 0;
};

// P(decision=feasible | label=infeasible) over the infeasible records.
double false_continue_rate(std::span<const EvaluationRecord> records);

// Fraction of feasible-labelled records completed successfully. Declaring
// STOP on a feasible task counts as non-success.
double success_rate(std::span<const EvaluationRecord> records);

struct TokenCostSummary {
  std::optional<double> early_stop_mean;    // mean tok over correct stops
  std::optional<double> task_failure_mean;  // mean tok over undetected failures
  std::optional<double> ratio;              // failure mean / stop mean
  long long early_stop_count = 0;
  long long task_failure_count = 0;
  // Completed-infeasible runs; excluded from both means, counted apart.
  long long false_positive_count = 0;
};

// Token costs over infeasible-labelled records only.
TokenCostSummary token_costs(std::span<const EvaluationRecord> records);

// Binary accuracy over both labels: correct stop or successful completion.
double fass(std::span<const EvaluationRecord> records);

struct FalsePositiveCounts {
  std::map<std::string, long long> per_dataset;
  long long total = 0;
};

// Infeasible-labelled records that were nonetheless completed successfully.
FalsePositiveCounts false_positive_count(std::span<const EvaluationRecord> records);

struct FrontierPoint {
  std::string agent_id;
  double sr = 0.0;
  double fcr = 0.0;
};

// Non-dominated subset under (maximize sr, minimize fcr), ordered by
// descending sr. Exact ties on both coordinates are all retained.
std::vector<FrontierPoint> pareto_frontier(std::span<const FrontierPoint> points);

struct MetricCell {
  long long n_feasible = 0;
  long long n_infeasible = 0;
  std::optional<double> fcr;
  std::optional<double> sr;
  std::optional<double> fass_score;
  TokenCostSummary tokens;
  long long false_positives = 0;
};

struct AgentReport {
  std::map<std::string, MetricCell> per_dataset;
  MetricCell micro;  // pooled over the agent's records
  MetricCell macro;  // unweighted mean of the defined per-dataset values
};

struct MetricReport {
  std::map<std::string, AgentReport> agents;
  std::vector<FrontierPoint> frontier;  // from macro (sr, fcr) pairs
};

MetricReport build_metric_report(std::span<const EvaluationRecord> records);

// Machine-readable form and the table rendering that mirrors it.
std::string report_to_json(const MetricReport& report);
MetricReport report_from_json(const std::string& text);
std::string render_report_tables(const MetricReport& report);

}  // namespace feasikit::metrics
