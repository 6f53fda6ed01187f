#include "feasikit/critical_tools.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace feasikit::critical_tools {

namespace {

using nlohmann::json;
using task_model::Task;
using task_model::ToolSpec;
using trace_store::ExecutionTrace;
using trace_store::Outcome;

}  // namespace

ToolSet tool_set(const ExecutionTrace& trace) {
  if (trace.outcome != Outcome::success)
    throw DataError("tool_set: trace '" + trace.trace_id + "' is not a successful trace");
  ToolSet set;
  set.task_id = trace.task_id;
  set.agent_id = trace.agent_id;
  for (const auto& step : trace.steps) set.tools.insert(step.tool_name);
  return set;
}

CriticalToolSet critical_intersection(const std::vector<ToolSet>& tool_sets) {
  if (tool_sets.empty()) throw DataError("critical_intersection: empty input");
  const std::string& task_id = tool_sets.front().task_id;
  for (const auto& set : tool_sets) {
    if (set.task_id != task_id)
      throw DataError("critical_intersection: mixed task_ids ('" + task_id + "' vs '" +
                      set.task_id + "')");
  }
  CriticalToolSet critical;
  critical.task_id = task_id;
  critical.tools = tool_sets.front().tools;
  for (size_t i = 1; i < tool_sets.size(); ++i) {
    std::set<std::string> next;
    std::set_intersection(critical.tools.begin(), critical.tools.end(),
                          tool_sets[i].tools.begin(), tool_sets[i].tools.end(),
                          std::inserter(next, next.begin()));
    critical.tools = std::move(next);
  }
  for (const auto& set : tool_sets) critical.contributing_agents.push_back(set.agent_id);
  return critical;
}

InfeasibleTask mask_tools(const Task& task, const CriticalToolSet& critical) {
  if (critical.tools.empty()) throw DataError("mask_tools: empty critical set");
  std::set<std::string> pool_names;
  for (const auto& tool : task.tool_pool) pool_names.insert(tool.name);
  for (const auto& name : critical.tools) {
    if (!pool_names.count(name))
      throw DataError("mask_tools: critical tool '" + name + "' not in pool of task '" +
                      task.task_id + "'");
  }
  InfeasibleTask variant;
  variant.task_id = task.task_id + "::infeasible";
  variant.source_task_id = task.task_id;
  variant.dataset_id = task.dataset_id;
  variant.query = task.query;
  variant.masked_tools = critical.tools;
  for (const auto& tool : task.tool_pool) {
    if (!critical.tools.count(tool.name)) variant.remaining_pool.push_back(tool);
  }
  variant.ground_truth = task.ground_truth;
  variant.metadata = task.metadata;
  return variant;
}

std::string to_string(SkipReason reason) {
  switch (reason) {
    case SkipReason::not_all_succeeded: return "not_all_succeeded";
    case SkipReason::empty_intersection: return "empty_intersection";
    case SkipReason::empty_trace: return "empty_trace";
  }
  return "empty_intersection";
}

SuiteBuild build_infeasible_suite(const std::vector<Task>& tasks,
                                  const std::vector<ExecutionTrace>& traces,
                                  const std::vector<std::string>& roster,
                                  const RetentionPolicy& policy) {
  if (roster.empty()) throw DataError("build_infeasible_suite: empty roster");

  std::map<std::pair<std::string, std::string>, const ExecutionTrace*> by_key;
  for (const auto& trace : traces) by_key[{trace.task_id, trace.agent_id}] = &trace;

  SuiteBuild build;
  for (const auto& task : tasks) {
    int successes = 0;
    std::vector<ToolSet> sets;
    bool had_empty_success = false;
    for (const auto& agent : roster) {
      auto it = by_key.find({task.task_id, agent});
      if (it == by_key.end() || it->second->outcome != Outcome::success) continue;
      ++successes;
      auto set = tool_set(*it->second);
      if (set.tools.empty())
        had_empty_success = true;  // excluded from intersection inputs, logged
      else
        sets.push_back(std::move(set));
    }

    const bool retained = policy.require_all_success
                              ? successes == static_cast<int>(roster.size())
                              : successes >= policy.min_successes;
    if (!retained) {
      build.skips.push_back({task.task_id, SkipReason::not_all_succeeded});
      continue;
    }
    if (sets.empty()) {
      build.skips.push_back({task.task_id, SkipReason::empty_trace});
      continue;
    }
    auto critical = critical_intersection(sets);
    if (critical.tools.empty()) {
      build.skips.push_back({task.task_id, had_empty_success ? SkipReason::empty_trace
                                                             : SkipReason::empty_intersection});
      continue;
    }
    build.suite.push_back(mask_tools(task, critical));
  }
  return build;
}

namespace {

json tool_to_json(const ToolSpec& tool) {
  // Mirrors the canonical task format for pool entries.
  json params = json::object();
  for (const auto& [name, spec] : tool.parameters) {
    json p;
    p["type"] = task_model::to_string(spec.type);
    p["required"] = spec.required;
    if (spec.type == task_model::ParamType::enumeration) p["values"] = spec.enum_values;
    params[name] = p;
  }
  return {{"name", tool.name}, {"description", tool.description}, {"parameters", params}};
}

}  // namespace

void save_infeasible_suite(const std::filesystem::path& path, const std::string& dataset_id,
                           const std::vector<InfeasibleTask>& suite) {
  json doc;
  doc["schema_version"] = 1;
  doc["dataset_id"] = dataset_id;
  json tasks = json::array();
  for (const auto& variant : suite) {
    json t;
    t["task_id"] = variant.task_id;
    t["source_task_id"] = variant.source_task_id;
    t["dataset_id"] = variant.dataset_id;
    t["feasibility_label"] = "infeasible";
    t["query"] = variant.query;
    t["masked_tools"] = std::vector<std::string>(variant.masked_tools.begin(),
                                                 variant.masked_tools.end());
    json pool = json::array();
    for (const auto& tool : variant.remaining_pool) pool.push_back(tool_to_json(tool));
    t["tool_pool"] = pool;
    if (!variant.ground_truth.empty()) t["ground_truth"] = variant.ground_truth;
    if (!variant.metadata.empty()) t["metadata"] = variant.metadata;
    tasks.push_back(t);
  }
  doc["tasks"] = tasks;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write suite file: " + path.string());
  out << doc.dump(2) << "\n";
}

std::vector<InfeasibleTask> load_infeasible_suite(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open suite file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::exception& e) {
    throw DataError("parse failure in " + path.filename().string() + ": " + e.what());
  }
  const std::string file_dataset = doc.value("dataset_id", "");
  std::vector<InfeasibleTask> suite;
  for (const auto& t : doc.at("tasks")) {
    InfeasibleTask variant;
    variant.task_id = t.at("task_id").get<std::string>();
    variant.source_task_id = t.value("source_task_id", "");
    variant.dataset_id = t.value("dataset_id", file_dataset);
    variant.query = t.at("query").get<std::string>();
    if (t.value("feasibility_label", "") != "infeasible")
      throw DataError(path.filename().string() + ": task '" + variant.task_id +
                      "' missing feasibility_label=infeasible");
    for (const auto& name : t.at("masked_tools")) variant.masked_tools.insert(name.get<std::string>());
    for (const auto& tool : t.at("tool_pool")) {
      ToolSpec spec;
      spec.name = tool.at("name").get<std::string>();
      spec.description = tool.value("description", "");
      if (tool.contains("parameters")) {
        for (const auto& [pname, pj] : tool["parameters"].items()) {
          task_model::ParamSpec ps;
          ps.type = task_model::param_type_from_string(pj.at("type").get<std::string>());
          ps.required = pj.value("required", false);
          if (pj.contains("values"))
            ps.enum_values = pj["values"].get<std::vector<std::string>>();
          spec.parameters[pname] = ps;
        }
      }
      variant.remaining_pool.push_back(spec);
    }
    if (t.contains("ground_truth"))
      variant.ground_truth = t["ground_truth"].get<std::map<std::string, std::string>>();
    if (t.contains("metadata"))
      variant.metadata = t["metadata"].get<std::map<std::string, std::string>>();
    if (variant.masked_tools.empty())
      throw DataError(path.filename().string() + ": task '" + variant.task_id +
                      "' has an empty masked_tools set");
    suite.push_back(std::move(variant));
  }
  return suite;
}

task_model::Task to_task(const InfeasibleTask& variant) {
  Task task;
  task.task_id = variant.task_id;
  task.dataset_id = variant.dataset_id;
  task.query = variant.query;
  task.tool_pool = variant.remaining_pool;
  task.ground_truth = variant.ground_truth;
  task.metadata = variant.metadata;
  task.metadata["feasibility_label"] = "infeasible";
  task.metadata["source_task_id"] = variant.source_task_id;
  return task;
}

MaskPrecision evaluate_mask_precision(const std::vector<InfeasibleTask>& suite,
                                      const std::map<std::string, Task>& source_tasks) {
  MaskPrecision report;
  for (const auto& variant : suite) {
    ++report.total;
    auto source = source_tasks.find(variant.source_task_id);
    if (source == source_tasks.end())
      throw DataError("evaluate_mask_precision: missing source task '" +
                      variant.source_task_id + "'");
    std::vector<const ToolSpec*> masked_specs;
    for (const auto& tool : source->second.tool_pool)
      if (variant.masked_tools.count(tool.name)) masked_specs.push_back(&tool);

    bool substitutable = false;
    for (const auto& remaining : variant.remaining_pool) {
      for (const ToolSpec* masked : masked_specs) {
        if (remaining.description == masked->description &&
            remaining.parameters == masked->parameters) {
          substitutable = true;
          break;
        }
      }
      if (substitutable) break;
    }
    if (substitutable)
      report.substitutable_tasks.push_back(variant.task_id);
    else
      ++report.genuinely_infeasible;
  }
  return report;
}

RecoveryReport compare_to_planted(const std::vector<InfeasibleTask>& suite,
                                  const std::map<std::string, std::set<std::string>>& planted) {
  RecoveryReport report;
  for (const auto& variant : suite) {
    auto it = planted.find(variant.source_task_id);
    if (it == planted.end()) continue;
    ++report.tasks_compared;
    const auto& expected = it->second;
    const auto& identified = variant.masked_tools;
    report.identified_total += static_cast<long long>(identified.size());
    report.planted_total += static_cast<long long>(expected.size());
    long long overlap = 0;
    for (const auto& name : identified)
      if (expected.count(name)) ++overlap;
    report.overlap_total += overlap;
    if (identified == expected) ++report.exact_matches;
  }
  return report;
}

}  // namespace feasikit::critical_tools
