// feasikit: feasibility-aware agent evaluation pipeline.
//
// Subcommands: gen-synthetic, run, build-infeasible, evaluate, report,
// sample-plan, agreement. Exit codes: 0 ok, 1 usage/config error,
// 2 data error, 3 transport error.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "feasikit/agents.hpp"
#include "feasikit/common.hpp"
#include "feasikit/critical_tools.hpp"
#include "feasikit/metrics.hpp"
#include "feasikit/stats.hpp"
#include "feasikit/task_model.hpp"
#include "feasikit/trace_store.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
namespace agents = feasikit::agents;
namespace critical = feasikit::critical_tools;
namespace metrics = feasikit::metrics;
namespace stats = feasikit::stats;
namespace task_model = feasikit::task_model;
namespace trace_store = feasikit::trace_store;
using feasikit::ConfigError;
using feasikit::DataError;
using feasikit::Feasibility;
using feasikit::TransportError;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << text;
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError("parse failure in " + path.string() + ": " + e.what());
  }
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buffer[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buffer;
}

std::string fnv_hash(const std::string& text) {
  unsigned long long h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buffer[24];
  std::snprintf(buffer, sizeof(buffer), "%016llx", h);
  return buffer;
}

// ---- dataset loading (canonical, adapters, or infeasible suites) ----------

bool looks_like_suite(const fs::path& path) {
  try {
    json doc = json::parse(read_text(path));
    return doc.is_object() && doc.contains("tasks") && !doc["tasks"].empty() &&
           doc["tasks"][0].contains("feasibility_label");
  } catch (...) {
    return false;
  }
}

struct LabeledTask {
  task_model::Task task;
  Feasibility label = Feasibility::feasible;
};

std::vector<LabeledTask> load_tasks_any(const fs::path& path, const std::string& format) {
  std::vector<LabeledTask> out;
  if (looks_like_suite(path)) {
    for (const auto& variant : critical::load_infeasible_suite(path))
      out.push_back({critical::to_task(variant), Feasibility::infeasible});
  } else {
    for (auto& task : task_model::load_dataset(path, format))
      out.push_back({std::move(task), Feasibility::feasible});
  }
  return out;
}

// ---- roster configuration --------------------------------------------------

struct RosterConfig {
  std::vector<agents::AgentSpec> roster;
  std::vector<std::pair<std::string, std::string>> pairs;  // planner, executor ids
  std::string mode = "single";
  std::string oracle = "tool_sequence";
  int max_turns = 0;  // 0 = per-dataset default
  int jobs = 1;
  std::uint64_t seed = 0;
};

agents::AgentSpec agent_from_json(const json& j, int ordinal, int roster_size) {
  agents::AgentSpec spec;
  spec.agent_id = j.at("agent_id").get<std::string>();
  spec.ordinal = ordinal;
  spec.roster_size = roster_size;
  const std::string kind = j.value("kind", "scripted");
  if (kind == "scripted") {
    spec.kind = agents::AgentKind::scripted;
    auto& policy = spec.scripted;
    if (j.contains("sequence")) policy.sequence = j["sequence"].get<std::vector<std::string>>();
    policy.follow_ground_truth = j.value("follow_ground_truth", false);
    policy.extra_tools = j.value("extra_tools", 0);
    policy.stop_aware = j.value("stop_aware", false);
    policy.style = agents::refusal_style_from_string(j.value("style", "keep_trying"));
    policy.memorize_ground_truth = j.value("memorize_ground_truth", false);
  } else if (kind == "remote") {
    spec.kind = agents::AgentKind::remote;
    auto& remote = spec.remote;
    remote.endpoint = j.at("endpoint").get<std::string>();
    remote.model = j.value("model", "default");
    remote.temperature = j.value("temperature", 0.0);
    remote.max_response_tokens = j.value("max_response_tokens", 4096);
    remote.credential_env = j.value("credential_env", "FEASIKIT_API_KEY");
    remote.max_retries = j.value("max_retries", 3);
  } else {
    throw ConfigError("unknown agent kind: '" + kind + "'");
  }
  return spec;
}

RosterConfig load_roster_config(const fs::path& path) {
  json doc = parse_json_file(path);
  RosterConfig config;
  if (!doc.contains("agents") || doc["agents"].empty())
    throw ConfigError("roster config needs a non-empty 'agents' list: " + path.string());
  const int roster_size = static_cast<int>(doc["agents"].size());
  int ordinal = 0;
  for (const auto& entry : doc["agents"])
    config.roster.push_back(agent_from_json(entry, ordinal++, roster_size));
  for (const auto& pair : doc.value("pairs", json::array()))
    config.pairs.emplace_back(pair.at("planner").get<std::string>(),
                              pair.at("executor").get<std::string>());
  config.mode = doc.value("mode", "single");
  config.oracle = doc.value("oracle", "tool_sequence");
  config.max_turns = doc.value("max_turns", 0);
  config.jobs = doc.value("jobs", 1);
  config.seed = doc.value("seed", 0ULL);
  return config;
}

const agents::AgentSpec& find_agent(const RosterConfig& config, const std::string& agent_id) {
  for (const auto& agent : config.roster)
    if (agent.agent_id == agent_id) return agent;
  throw ConfigError("unresolvable agent: '" + agent_id + "'");
}

// ---- gen-synthetic ---------------------------------------------------------

int cmd_gen_synthetic(int tasks, int pool_size, int critical_count, int redundant_pairs,
                      int critical_clones, std::uint64_t seed, const fs::path& out_dir) {
  task_model::SyntheticSuiteSpec spec;
  spec.task_count = tasks;
  spec.pool_size = pool_size;
  spec.critical_count = critical_count;
  spec.redundant_pairs = redundant_pairs;
  spec.critical_clone_pairs = critical_clones;
  spec.seed = seed;
  const auto suite = task_model::generate_synthetic_suite(spec);
  fs::create_directories(out_dir);
  task_model::save_dataset(out_dir / "synthetic_tasks.json", "synthetic", suite.tasks);
  task_model::save_planted(out_dir / "planted.json", suite.planted_critical);
  std::cout << "wrote " << suite.tasks.size() << " tasks to "
            << (out_dir / "synthetic_tasks.json").string() << "\n";
  return 0;
}

// ---- run -------------------------------------------------------------------

struct TraceFileState {
  std::set<std::string> seen_ids;
  std::set<std::pair<std::string, std::string>> finalized;  // (task_id, agent_id)
};

TraceFileState scan_trace_file(const fs::path& path) {
  TraceFileState state;
  if (!fs::exists(path)) return state;
  std::ifstream in(path, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed trace record in " + path.string() + ": " + e.what());
    }
    state.seen_ids.insert(record.at("trace_id").get<std::string>());
    if (record.at("kind").get<std::string>() == "final")
      state.finalized.insert({record.at("task_id").get<std::string>(),
                              record.at("agent_id").get<std::string>()});
  }
  return state;
}

std::string next_attempt_id(const TraceFileState& state, const std::string& base) {
  if (!state.seen_ids.count(base)) return base;
  for (int attempt = 2;; ++attempt) {
    const std::string candidate = base + "#" + std::to_string(attempt);
    if (!state.seen_ids.count(candidate)) return candidate;
  }
}

int cmd_run(const fs::path& dataset, const std::string& format, const fs::path& config_path,
            const std::string& mode_flag, const fs::path& out_dir, int jobs_flag,
            long long seed_flag, int max_turns_flag, const std::string& oracle_flag) {
  RosterConfig config = load_roster_config(config_path);
  if (!mode_flag.empty()) config.mode = mode_flag;
  if (jobs_flag > 0) config.jobs = jobs_flag;
  if (seed_flag >= 0) config.seed = static_cast<std::uint64_t>(seed_flag);
  if (max_turns_flag > 0) config.max_turns = max_turns_flag;
  if (!oracle_flag.empty()) config.oracle = oracle_flag;
  if (config.mode != "single" && config.mode != "planner-executor")
    throw ConfigError("mode must be 'single' or 'planner-executor'");
  if (config.mode == "planner-executor" && config.pairs.empty())
    throw ConfigError("planner-executor mode needs a 'pairs' list in the roster config");

  const auto labeled = load_tasks_any(dataset, format);
  const auto oracle = agents::oracle_by_name(config.oracle);

  fs::create_directories(out_dir);
  const fs::path trace_path = out_dir / "traces.jsonl";
  const fs::path manifest_path = out_dir / "manifest.json";

  // Manifest first; identical reruns resume, anything else is refused.
  json manifest;
  manifest["schema_version"] = 1;
  manifest["dataset"] = dataset.string();
  manifest["dataset_format"] = format;
  manifest["mode"] = config.mode;
  manifest["oracle"] = config.oracle;
  manifest["max_turns"] = config.max_turns;
  manifest["seed"] = config.seed;
  json roster = json::array();
  for (const auto& agent : config.roster)
    roster.push_back({{"agent_id", agent.agent_id},
                      {"kind", agent.kind == agents::AgentKind::scripted ? "scripted" : "remote"}});
  manifest["agents"] = roster;
  json pairs = json::array();
  for (const auto& [planner, executor] : config.pairs)
    pairs.push_back({{"planner", planner}, {"executor", executor}});
  manifest["pairs"] = pairs;
  manifest["trace_file"] = "traces.jsonl";
  manifest["run_id"] = "run-" + fnv_hash(manifest.dump());
  if (fs::exists(manifest_path)) {
    json existing = parse_json_file(manifest_path);
    if (existing.value("run_id", "") != manifest["run_id"].get<std::string>())
      throw DataError("output dir holds a different run (" + existing.value("run_id", "?") +
                      "); choose a fresh --out");
  }
  manifest["created_at"] = iso_now();
  write_text(manifest_path, manifest.dump(2) + "\n");

  const TraceFileState state = scan_trace_file(trace_path);
  trace_store::TraceWriter writer(trace_path);

  struct Unit {
    const LabeledTask* task;
    const agents::AgentSpec* agent;             // single mode
    const agents::AgentSpec* planner = nullptr;  // pair mode
    const agents::AgentSpec* executor = nullptr;
    std::string trace_id;
  };
  std::vector<Unit> units;
  size_t skipped = 0;

  if (config.mode == "single") {
    for (const auto& entry : labeled) {
      for (const auto& agent : config.roster) {
        if (state.finalized.count({entry.task.task_id, agent.agent_id})) {
          ++skipped;
          continue;
        }
        Unit unit{&entry, &agent, nullptr, nullptr,
                  next_attempt_id(state, entry.task.task_id + "__" + agent.agent_id)};
        units.push_back(unit);
      }
    }
  } else {
    for (const auto& entry : labeled) {
      for (const auto& [planner_id, executor_id] : config.pairs) {
        const std::string pair_id = planner_id + "+" + executor_id;
        if (state.finalized.count({entry.task.task_id, pair_id})) {
          ++skipped;
          continue;
        }
        Unit unit{&entry, nullptr, &find_agent(config, planner_id),
                  &find_agent(config, executor_id),
                  next_attempt_id(state, entry.task.task_id + "__" + pair_id)};
        units.push_back(unit);
      }
    }
  }

  auto run_unit = [&](const Unit& unit) {
    const auto& task = unit.task->task;
    agents::RunConfig run_config;
    run_config.max_turns =
        config.max_turns > 0 ? config.max_turns : agents::default_turn_cap(task.dataset_id);
    agents::ToolEnvironment env(task.tool_pool);
    if (unit.agent != nullptr)
      agents::run_single_agent(*unit.agent, task, run_config, env, writer, oracle, unit.trace_id);
    else
      agents::run_planner_executor(*unit.planner, *unit.executor, task, run_config, env, writer,
                                   oracle, unit.trace_id);
  };

  if (config.jobs <= 1) {
    for (const auto& unit : units) run_unit(unit);
  } else {
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= units.size()) break;
        try {
          run_unit(units[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> threads;
    for (int i = 0; i < config.jobs; ++i) threads.emplace_back(worker);
    for (auto& thread : threads) thread.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  std::cout << "run " << manifest["run_id"].get<std::string>() << ": " << units.size()
            << " traces written, " << skipped << " already finalized\n";
  return 0;
}

// ---- build-infeasible -------------------------------------------------------

fs::path resolve_trace_file(const fs::path& traces) {
  if (fs::is_directory(traces)) return traces / "traces.jsonl";
  return traces;
}

std::vector<std::string> roster_from_manifest(const fs::path& traces,
                                              const std::vector<trace_store::ExecutionTrace>& all) {
  if (fs::is_directory(traces) && fs::exists(traces / "manifest.json")) {
    json manifest = parse_json_file(traces / "manifest.json");
    std::vector<std::string> roster;
    for (const auto& agent : manifest.value("agents", json::array()))
      roster.push_back(agent.at("agent_id").get<std::string>());
    if (!roster.empty()) return roster;
  }
  std::set<std::string> ids;
  for (const auto& trace : all) ids.insert(trace.agent_id);
  return {ids.begin(), ids.end()};
}

int cmd_build_infeasible(const fs::path& traces, const fs::path& dataset,
                         const std::string& format, const fs::path& out_path,
                         fs::path skip_log_path, const std::string& policy_name,
                         int min_successes, const fs::path& planted_path) {
  const auto tasks = task_model::load_dataset(dataset, format);
  const fs::path trace_file = resolve_trace_file(traces);
  if (!fs::exists(trace_file)) throw DataError("missing traces: " + trace_file.string());
  const auto all_traces = trace_store::read_traces(trace_file);
  std::vector<trace_store::ExecutionTrace> latest;
  for (auto& [key, trace] : trace_store::latest_by_task_agent(all_traces))
    latest.push_back(trace);
  const auto roster = roster_from_manifest(traces, latest);

  critical::RetentionPolicy policy;
  if (policy_name == "all") {
    policy.require_all_success = true;
  } else if (policy_name == "min") {
    policy.require_all_success = false;
    policy.min_successes = min_successes;
  } else {
    throw ConfigError("policy must be 'all' or 'min'");
  }

  const auto build = critical::build_infeasible_suite(tasks, latest, roster, policy);
  const std::string dataset_id = tasks.empty() ? "" : tasks.front().dataset_id;
  critical::save_infeasible_suite(out_path, dataset_id, build.suite);

  std::map<std::string, task_model::Task> by_id;
  for (const auto& task : tasks) by_id[task.task_id] = task;
  const auto precision = critical::evaluate_mask_precision(build.suite, by_id);

  json log;
  log["retained"] = build.suite.size();
  json skips = json::array();
  std::map<std::string, long long> counts;
  for (const auto& skip : build.skips) {
    skips.push_back({{"task_id", skip.task_id}, {"reason", critical::to_string(skip.reason)}});
    ++counts[critical::to_string(skip.reason)];
  }
  log["skips"] = skips;
  log["skip_counts"] = counts;
  log["mask_precision"] = {{"total", precision.total},
                           {"genuinely_infeasible", precision.genuinely_infeasible},
                           {"precision", precision.precision()},
                           {"substitutable_tasks", precision.substitutable_tasks}};
  if (!planted_path.empty()) {
    const auto planted = task_model::load_planted(planted_path);
    const auto recovery = critical::compare_to_planted(build.suite, planted);
    log["recovery"] = {{"tasks_compared", recovery.tasks_compared},
                       {"exact_matches", recovery.exact_matches},
                       {"exact_match_rate", recovery.exact_match_rate()},
                       {"precision", recovery.precision()},
                       {"recall", recovery.recall()}};
    std::cout << "recovery: exact " << recovery.exact_matches << "/" << recovery.tasks_compared
              << ", precision " << recovery.precision() << ", recall " << recovery.recall()
              << "\n";
  }
  if (skip_log_path.empty()) skip_log_path = out_path.parent_path() / "skip_log.json";
  write_text(skip_log_path, log.dump(2) + "\n");

  std::cout << "retained " << build.suite.size() << " of " << tasks.size()
            << " tasks; mask precision " << precision.precision() << " ("
            << precision.substitutable_tasks.size() << " substitutable)\n";
  return 0;
}

// ---- evaluate ---------------------------------------------------------------

int cmd_evaluate(const std::vector<fs::path>& suites, const fs::path& traces,
                 const std::string& oracle_name, const fs::path& out_dir) {
  const fs::path trace_file = resolve_trace_file(traces);
  if (!fs::exists(trace_file)) throw DataError("missing traces: " + trace_file.string());
  const auto latest = trace_store::latest_by_task_agent(trace_store::read_traces(trace_file));
  const auto oracle = agents::oracle_by_name(oracle_name);

  std::vector<metrics::EvaluationRecord> records;
  std::vector<std::string> uncovered;
  for (const auto& suite_path : suites) {
    for (const auto& entry : load_tasks_any(suite_path, "canonical")) {
      bool covered = false;
      for (const auto& [key, trace] : latest) {
        if (key.first != entry.task.task_id) continue;
        covered = true;
        metrics::EvaluationRecord record;
        record.task_id = entry.task.task_id;
        record.dataset_id = entry.task.dataset_id;
        record.agent_id = key.second;
        record.label = entry.label;
        record.decision = trace.decision;
        record.success = oracle(entry.task, trace);
        record.token_cost = trace_store::total_tokens(trace).total;
        records.push_back(std::move(record));
      }
      if (!covered) uncovered.push_back(entry.task.task_id);
    }
  }
  if (records.empty())
    throw DataError("no suite entries are covered by the given traces");
  for (const auto& task_id : uncovered)
    std::cerr << "warning: no trace for suite entry '" << task_id << "'\n";

  fs::create_directories(out_dir);
  std::ostringstream lines;
  for (const auto& record : records) {
    json j = {{"task_id", record.task_id},
              {"dataset_id", record.dataset_id},
              {"agent_id", record.agent_id},
              {"label", feasikit::to_string(record.label)},
              {"decision", feasikit::to_string(record.decision)},
              {"success", record.success},
              {"token_cost", record.token_cost}};
    lines << j.dump() << "\n";
  }
  write_text(out_dir / "records.jsonl", lines.str());

  const auto report = metrics::build_metric_report(records);
  write_text(out_dir / "report.json", metrics::report_to_json(report));
  write_text(out_dir / "report.txt", metrics::render_report_tables(report));
  std::cout << "evaluated " << records.size() << " records (" << uncovered.size()
            << " uncovered entries)\n";
  return 0;
}

int cmd_report(const fs::path& results, const fs::path& out_path) {
  const auto report = metrics::report_from_json(read_text(results));
  const std::string rendered = metrics::render_report_tables(report);
  if (out_path.empty())
    std::cout << rendered;
  else
    write_text(out_path, rendered);
  return 0;
}

// ---- sample-plan ------------------------------------------------------------

int cmd_sample_plan(const std::vector<fs::path>& suites, double confidence, double margin,
                    double variability, long long override_n, std::uint64_t seed,
                    const fs::path& out_dir) {
  std::vector<critical::InfeasibleTask> entries;
  for (const auto& path : suites)
    for (auto& variant : critical::load_infeasible_suite(path))
      entries.push_back(std::move(variant));
  if (entries.empty()) throw DataError("sample-plan: empty suite");

  std::map<std::string, long long> strata;
  std::map<std::string, std::vector<const critical::InfeasibleTask*>> by_stratum;
  for (const auto& entry : entries) {
    ++strata[entry.dataset_id];
    by_stratum[entry.dataset_id].push_back(&entry);
  }

  auto plan = stats::cochran_sample_size(static_cast<long long>(entries.size()), confidence,
                                         margin, variability);
  if (override_n > 0) {
    if (override_n > plan.population)
      throw DataError("sample-plan: override n exceeds the population");
    plan.n = override_n;
  }
  plan.allocation = stats::proportional_allocation(plan.n, strata);

  // Deterministic stratified sample: sort ids, shuffle per stratum.
  json sheet_rows = json::array();
  for (auto& [name, members] : by_stratum) {
    std::sort(members.begin(), members.end(),
              [](const critical::InfeasibleTask* a, const critical::InfeasibleTask* b) {
                return a->task_id < b->task_id;
              });
    std::mt19937_64 rng(seed ^ std::hash<std::string>{}(name));
    for (size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[rng() % i]);
    const long long take = plan.allocation.at(name);
    for (long long i = 0; i < take; ++i) {
      const auto* variant = members[static_cast<size_t>(i)];
      json row;
      row["task_id"] = variant->task_id;
      row["dataset"] = variant->dataset_id;
      row["query"] = variant->query;
      row["masked_tools"] =
          std::vector<std::string>(variant->masked_tools.begin(), variant->masked_tools.end());
      json pool = json::array();
      for (const auto& tool : variant->remaining_pool)
        pool.push_back(tool.name + ": " + tool.description);
      row["remaining_pool"] = pool;
      row["judgment"] = "";
      row["note"] = "";
      sheet_rows.push_back(row);
    }
  }

  fs::create_directories(out_dir);
  json plan_json;
  plan_json["population"] = plan.population;
  plan_json["confidence"] = plan.confidence;
  plan_json["margin"] = plan.margin;
  plan_json["variability"] = plan.variability;
  plan_json["n0"] = plan.n0;
  plan_json["n"] = plan.n;
  plan_json["allocation"] = plan.allocation;
  plan_json["seed"] = seed;
  write_text(out_dir / "plan.json", plan_json.dump(2) + "\n");
  for (const std::string annotator : {"annotator1", "annotator2"}) {
    json sheet = {{"annotator", annotator}, {"judgments", sheet_rows}};
    write_text(out_dir / ("sheet_" + annotator + ".json"), sheet.dump(2) + "\n");
  }
  std::cout << "plan: population " << plan.population << ", n " << plan.n << "\n";
  return 0;
}

// ---- agreement ----------------------------------------------------------------

struct Judgment {
  std::string dataset;
  bool critical = false;
};

std::map<std::string, Judgment> load_judgments(const fs::path& path) {
  json doc = parse_json_file(path);
  std::map<std::string, Judgment> out;
  for (const auto& row : doc.at("judgments")) {
    const std::string verdict = row.at("judgment").get<std::string>();
    if (verdict != "critical" && verdict != "substitutable")
      throw DataError(path.string() + ": judgment for task '" +
                      row.at("task_id").get<std::string>() +
                      "' must be 'critical' or 'substitutable'");
    out[row.at("task_id").get<std::string>()] =
        Judgment{row.value("dataset", ""), verdict == "critical"};
  }
  if (out.empty()) throw DataError(path.string() + ": no judgments");
  return out;
}

int cmd_agreement(const fs::path& first_path, const fs::path& second_path,
                  const fs::path& out_dir) {
  const auto first = load_judgments(first_path);
  const auto second = load_judgments(second_path);

  std::vector<std::string> only_first, only_second;
  for (const auto& [task_id, judgment] : first)
    if (!second.count(task_id)) only_first.push_back(task_id);
  for (const auto& [task_id, judgment] : second)
    if (!first.count(task_id)) only_second.push_back(task_id);
  if (!only_first.empty() || !only_second.empty()) {
    std::ostringstream message;
    message << "judgment files cover different task sets;";
    if (!only_first.empty()) {
      message << " only in first:";
      for (const auto& id : only_first) message << " " << id;
    }
    if (!only_second.empty()) {
      message << " only in second:";
      for (const auto& id : only_second) message << " " << id;
    }
    throw DataError(message.str());
  }

  std::map<std::string, stats::AgreementTable> per_stratum;
  stats::AgreementTable pooled;
  for (const auto& [task_id, judgment] : first) {
    const auto& other = second.at(task_id);
    auto& table = per_stratum[judgment.dataset];
    if (judgment.critical && other.critical) {
      ++table.both_positive;
      ++pooled.both_positive;
    } else if (judgment.critical) {
      ++table.first_only;
      ++pooled.first_only;
    } else if (other.critical) {
      ++table.second_only;
      ++pooled.second_only;
    } else {
      ++table.both_negative;
      ++pooled.both_negative;
    }
  }

  auto stratum_json = [](const stats::AgreementTable& table) {
    json j;
    j["n"] = table.total();
    j["table"] = {{"a", table.both_positive},
                  {"b", table.first_only},
                  {"c", table.second_only},
                  {"d", table.both_negative}};
    j["confirmed"] = table.both_positive;
    j["raw_agreement"] = stats::raw_agreement(table);
    if (auto kappa = stats::cohen_kappa(table)) j["cohen_kappa"] = *kappa;
    if (auto ac1 = stats::gwet_ac1(table)) j["gwet_ac1"] = *ac1;
    const auto ci = stats::wilson_interval(table.both_positive, table.total(), 0.95);
    j["confirmed_wilson_ci"] = {{"point", ci.point}, {"low", ci.low}, {"high", ci.high}};
    return j;
  };

  json report;
  json strata = json::object();
  for (const auto& [name, table] : per_stratum) strata[name] = stratum_json(table);
  report["strata"] = strata;
  report["pooled"] = stratum_json(pooled);

  std::ostringstream text;
  text << "Dual-annotator verification\n";
  text << std::left << std::setw(20) << "Stratum" << std::right << std::setw(8) << "n"
       << std::setw(14) << "Confirmed" << std::setw(14) << "Agreement" << std::setw(22)
       << "Wilson 95% CI" << "\n";
  auto emit_row = [&](const std::string& name, const stats::AgreementTable& table) {
    const auto ci = stats::wilson_interval(table.both_positive, table.total(), 0.95);
    std::ostringstream confirmed, interval;
    confirmed << table.both_positive << " ("
              << feasikit::round_half_up(100.0 * ci.point, 1) << ")";
    interval << "[" << std::fixed << std::setprecision(3)
             << feasikit::round_half_up(ci.low, 3) << ", "
             << feasikit::round_half_up(ci.high, 3) << "]";
    text << std::left << std::setw(20) << name << std::right << std::setw(8) << table.total()
         << std::setw(14) << confirmed.str() << std::setw(14)
         << feasikit::round_half_up(100.0 * stats::raw_agreement(table), 1) << std::setw(22)
         << interval.str() << "\n";
  };
  for (const auto& [name, table] : per_stratum) emit_row(name, table);
  emit_row("Total", pooled);
  if (auto kappa = stats::cohen_kappa(pooled))
    text << "Pooled Cohen's kappa = " << feasikit::round_half_up(*kappa, 2) << "\n";
  if (auto ac1 = stats::gwet_ac1(pooled))
    text << "Pooled Gwet's AC1 = " << feasikit::round_half_up(*ac1, 2) << "\n";

  fs::create_directories(out_dir);
  write_text(out_dir / "agreement.json", report.dump(2) + "\n");
  write_text(out_dir / "agreement.txt", text.str());
  std::cout << text.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feasibility-aware agent evaluation toolkit"};
  app.require_subcommand(1);

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic task suite");
  int gen_tasks = 10, gen_pool = 6, gen_critical = 2, gen_redundant = 0, gen_critical_clones = 0;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "out";
  gen->add_option("--tasks", gen_tasks, "number of tasks");
  gen->add_option("--pool-size", gen_pool, "base tools per task");
  gen->add_option("--critical", gen_critical, "planted critical tools per task");
  gen->add_option("--redundant-pairs", gen_redundant, "clone pairs on non-critical tools");
  gen->add_option("--critical-clones", gen_critical_clones, "clone pairs on critical tools");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output directory");

  // run
  auto* run = app.add_subcommand("run", "run a roster of agents over a dataset");
  std::string run_dataset, run_format = "canonical", run_config, run_mode, run_out = "out";
  std::string run_oracle;
  int run_jobs = 0, run_max_turns = 0;
  long long run_seed = -1;
  run->add_option("--dataset", run_dataset, "task file (canonical, adapter, or suite)")
      ->required();
  run->add_option("--format", run_format, "dataset format for non-suite files");
  run->add_option("--config", run_config, "roster config file")->required();
  run->add_option("--mode", run_mode, "single | planner-executor");
  run->add_option("--out", run_out, "output directory");
  run->add_option("--jobs", run_jobs, "parallel workers");
  run->add_option("--seed", run_seed, "seed recorded in the manifest");
  run->add_option("--max-turns", run_max_turns, "turn cap override (0 = per-dataset default)");
  run->add_option("--oracle", run_oracle, "success oracle (tool_sequence | answer_match)");

  // build-infeasible
  auto* build = app.add_subcommand("build-infeasible", "mask critical tools into a suite");
  std::string build_traces, build_dataset, build_format = "canonical";
  std::string build_out = "infeasible_suite.json", build_skip_log, build_policy = "all";
  std::string build_planted;
  int build_min = 1;
  build->add_option("--traces", build_traces, "trace file or run directory")->required();
  build->add_option("--dataset", build_dataset, "source task file")->required();
  build->add_option("--format", build_format, "dataset format");
  build->add_option("--out", build_out, "suite output file");
  build->add_option("--skip-log", build_skip_log, "skip log output file");
  build->add_option("--policy", build_policy, "retention policy: all | min");
  build->add_option("--min-successes", build_min, "min successes for the 'min' policy");
  build->add_option("--planted", build_planted, "planted criticals file for recovery reporting");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score traces into metric reports");
  std::vector<std::string> eval_suites;
  std::string eval_traces, eval_oracle = "tool_sequence", eval_out = "out";
  evaluate->add_option("--suite", eval_suites, "task/suite files (repeatable)")->required();
  evaluate->add_option("--traces", eval_traces, "trace file or run directory")->required();
  evaluate->add_option("--oracle", eval_oracle, "success oracle");
  evaluate->add_option("--out", eval_out, "output directory");

  // report
  auto* report = app.add_subcommand("report", "render tables from a results file");
  std::string report_results, report_out;
  report->add_option("--results", report_results, "report.json produced by evaluate")->required();
  report->add_option("--out", report_out, "output file (stdout when omitted)");

  // sample-plan
  auto* plan = app.add_subcommand("sample-plan", "plan a stratified verification sample");
  std::vector<std::string> plan_suites;
  double plan_confidence = 0.95, plan_margin = 0.05, plan_p = 0.5;
  long long plan_override = 0;
  std::uint64_t plan_seed = 1;
  std::string plan_out = "out";
  plan->add_option("--suite", plan_suites, "infeasible suite files (repeatable)")->required();
  plan->add_option("--confidence", plan_confidence, "confidence level");
  plan->add_option("--margin", plan_margin, "margin of error");
  plan->add_option("--p", plan_p, "variability estimate");
  plan->add_option("--override-n", plan_override, "explicit sample size override");
  plan->add_option("--seed", plan_seed, "sampling seed");
  plan->add_option("--out", plan_out, "output directory");

  // agreement
  auto* agreement = app.add_subcommand("agreement", "score two annotators' judgment files");
  std::vector<std::string> agreement_files;
  std::string agreement_out = "out";
  agreement->add_option("--judgments", agreement_files, "exactly two judgment files")
      ->expected(2)
      ->required();
  agreement->add_option("--out", agreement_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed())
      return cmd_gen_synthetic(gen_tasks, gen_pool, gen_critical, gen_redundant,
                               gen_critical_clones, gen_seed, gen_out);
    if (run->parsed())
      return cmd_run(run_dataset, run_format, run_config, run_mode, run_out, run_jobs, run_seed,
                     run_max_turns, run_oracle);
    if (build->parsed())
      return cmd_build_infeasible(build_traces, build_dataset, build_format, build_out,
                                  build_skip_log, build_policy, build_min, build_planted);
    if (evaluate->parsed()) {
      std::vector<fs::path> suite_paths(eval_suites.begin(), eval_suites.end());
      return cmd_evaluate(suite_paths, eval_traces, eval_oracle, eval_out);
    }
    if (report->parsed()) return cmd_report(report_results, report_out);
    if (plan->parsed()) {
      std::vector<fs::path> suite_paths(plan_suites.begin(), plan_suites.end());
      return cmd_sample_plan(suite_paths, plan_confidence, plan_margin, plan_p, plan_override,
                             plan_seed, plan_out);
    }
    if (agreement->parsed())
      return cmd_agreement(agreement_files[0], agreement_files[1], agreement_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
