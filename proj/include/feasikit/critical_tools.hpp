#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "feasikit/task_model.hpp"
#include "feasikit/trace_store.hpp"

namespace feasikit::critical_tools {

struct ToolSet {
  std::string task_id;
  std::string agent_id;
  std::set<std::string> tools;
};

// Deduplicated tool names over the steps of a successful trace.
ToolSet tool_set(const trace_store::ExecutionTrace& trace);

struct CriticalToolSet {
  std::string task_id;
  std::set<std::string> tools;
  std::vector<std::string> contributing_agents;
};

// Exact set intersection; an empty result is valid but means "no critical
// tools identified" and produces no infeasible variant downstream.
CriticalToolSet critical_intersection(const std::vector<ToolSet>& tool_sets);

struct InfeasibleTask {
  std::string task_id;
  std::string source_task_id;
  std::string dataset_id;
  std::string query;
  std::set<std::string> masked_tools;               // C_i
  std::vector<task_model::ToolSpec> remaining_pool;  // T_i' = T_i \ C_i
  std::map<std::string, std::string> ground_truth;   // carried from the source task
  std::map<std::string, std::string> metadata;
  // feasibility label is fixed to infeasible

  bool operator==(const InfeasibleTask&) const = default;
};

InfeasibleTask mask_tools(const task_model::Task& task, const CriticalToolSet& critical);

struct RetentionPolicy {
  bool require_all_success = true;  // every roster agent must have succeeded
  int min_successes = 1;            // used when require_all_success is false
};

enum class SkipReason { not_all_succeeded, empty_intersection, empty_trace };
std::string to_string(SkipReason reason);

struct SuiteBuild {
  std::vector<InfeasibleTask> suite;
  struct Skip {
    std::string task_id;
    SkipReason reason;
  };
  std::vector<Skip> skips;
};

// For each task where the retention policy holds and the intersection over
// the (non-empty) successful tool sets is non-empty, emits one InfeasibleTask.
// Zero-tool-call successful traces are excluded from intersection inputs.
SuiteBuild build_infeasible_suite(const std::vector<task_model::Task>& tasks,
                                  const std::vector<trace_store::ExecutionTrace>& traces,
                                  const std::vector<std::string>& roster,
                                  const RetentionPolicy& policy = {});

void save_infeasible_suite(const std::filesystem::path& path, const std::string& dataset_id,
                           const std::vector<InfeasibleTask>& suite);
std::vector<InfeasibleTask> load_infeasible_suite(const std::filesystem::path& path);

// View of the variant as a runnable task (tool_pool = remaining pool).
task_model::Task to_task(const InfeasibleTask& variant);

// Genuine-infeasibility check: a variant counts substitutable when its
// remaining pool still holds an exact functional clone (equal description and
// parameter schema) of a masked tool. Masked specs are looked up in the
// source tasks, keyed by task_id.
struct MaskPrecision {
  long long total = 0;
  long long genuinely_infeasible = 0;
  std::vector<std::string> substitutable_tasks;

  double precision() const {
    return total == 0 ? 1.0
                      : static_cast<double>(genuinely_infeasible) / static_cast<double>(total);
  }
};

MaskPrecision evaluate_mask_precision(const std::vector<InfeasibleTask>& suite,
                                      const std::map<std::string, task_model::Task>& source_tasks);

// Identified-vs-planted comparison for synthetic suites.
struct RecoveryReport {
  long long tasks_compared = 0;
  long long exact_matches = 0;
  long long identified_total = 0;  // sum of |identified|
  long long overlap_total = 0;     // sum of |identified ∩ planted|
  long long planted_total = 0;     // sum of |planted|

  double precision() const {
    return identified_total == 0
               ? 1.0
               : static_cast<double>(overlap_total) / static_cast<double>(identified_total);
  }
  double recall() const {
    return planted_total == 0
               ? 1.0
               : static_cast<double>(overlap_total) / static_cast<double>(planted_total);
  }
  double exact_match_rate() const {
    return tasks_compared == 0
               ? 1.0
               : static_cast<double>(exact_matches) / static_cast<double>(tasks_compared);
  }
};

RecoveryReport compare_to_planted(const std::vector<InfeasibleTask>& suite,
                                  const std::map<std::string, std::set<std::string>>& planted);

}  // namespace feasikit::critical_tools
