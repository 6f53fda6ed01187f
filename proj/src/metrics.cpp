#include "feasikit/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

namespace feasikit::metrics {

namespace {

using nlohmann::json;

bool is_infeasible(const EvaluationRecord& r) { return r.label == Feasibility::infeasible; }

}  // namespace

double false_continue_rate(std::span<const EvaluationRecord> records) {
  long long continued = 0;
  long long total = 0;
  for (const auto& r : records) {
    if (!is_infeasible(r)) continue;
    ++total;
    if (r.decision == Feasibility::feasible) ++continued;
  }
  if (total == 0) throw DataError("false_continue_rate: no infeasible records");
  return static_cast<double>(continued) / static_cast<double>(total);
}

double success_rate(std::span<const EvaluationRecord> records) {
  long long succeeded = 0;
  long long total = 0;
  for (const auto& r : records) {
    if (is_infeasible(r)) continue;
    ++total;
    if (r.success && r.decision == Feasibility::feasible) ++succeeded;
  }
  if (total == 0) throw DataError("success_rate: no feasible records");
  return static_cast<double>(succeeded) / static_cast<double>(total);
}

TokenCostSummary token_costs(std::span<const EvaluationRecord> records) {
  TokenCostSummary summary;
  long long stop_tokens = 0;
  long long fail_tokens = 0;
  for (const auto& r : records) {
    if (!is_infeasible(r)) continue;
    if (r.decision == Feasibility::infeasible) {
      ++summary.early_stop_count;
      stop_tokens += r.token_cost;
    } else if (r.success) {
      ++summary.false_positive_count;
    } else {
      ++summary.task_failure_count;
      fail_tokens += r.token_cost;
    }
  }
  if (summary.early_stop_count > 0)
    summary.early_stop_mean =
        static_cast<double>(stop_tokens) / static_cast<double>(summary.early_stop_count);
  if (summary.task_failure_count > 0)
    summary.task_failure_mean =
        static_cast<double>(fail_tokens) / static_cast<double>(summary.task_failure_count);
  if (summary.early_stop_mean && summary.task_failure_mean && *summary.early_stop_mean > 0.0)
    summary.ratio = *summary.task_failure_mean / *summary.early_stop_mean;
  return summary;
}

double fass(std::span<const EvaluationRecord> records) {
  if (records.empty()) throw DataError("fass: no records");
  long long correct = 0;
  for (const auto& r : records) {
    if (is_infeasible(r)) {
      if (r.decision == Feasibility::infeasible) ++correct;
    } else {
      if (r.decision == Feasibility::feasible && r.success) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

FalsePositiveCounts false_positive_count(std::span<const EvaluationRecord> records) {
  FalsePositiveCounts counts;
  for (const auto& r : records) {
    if (!is_infeasible(r)) continue;
    counts.per_dataset.try_emplace(r.dataset_id, 0);
    if (r.decision == Feasibility::feasible && r.success) {
      ++counts.per_dataset[r.dataset_id];
      ++counts.total;
    }
  }
  return counts;
}

std::vector<FrontierPoint> pareto_frontier(std::span<const FrontierPoint> points) {
  std::vector<FrontierPoint> frontier;
  for (size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < points.size() && !dominated; ++j) {
      if (j == i) continue;
      const bool ge_sr = points[j].sr >= points[i].sr;
      const bool le_fcr = points[j].fcr <= points[i].fcr;
      const bool strict = points[j].sr > points[i].sr || points[j].fcr < points[i].fcr;
      if (ge_sr && le_fcr && strict) dominated = true;
    }
    if (!dominated) frontier.push_back(points[i]);
  }
  std::stable_sort(frontier.begin(), frontier.end(),
                   [](const FrontierPoint& a, const FrontierPoint& b) { return a.sr > b.sr; });
  return frontier;
}

namespace {

MetricCell cell_from_records(const std::vector<EvaluationRecord>& records) {
  MetricCell cell;
  for (const auto& r : records) {
    if (is_infeasible(r))
      ++cell.n_infeasible;
    else
      ++cell.n_feasible;
  }
  std::span<const EvaluationRecord> span(records);
  if (cell.n_infeasible > 0) cell.fcr = false_continue_rate(span);
  if (cell.n_feasible > 0) cell.sr = success_rate(span);
  if (!records.empty()) cell.fass_score = fass(span);
  cell.tokens = token_costs(span);
  cell.false_positives = false_positive_count(span).total;
  return cell;
}

std::optional<double> mean_of_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  long long count = 0;
  for (const auto& v : values) {
    if (!v) continue;
    sum += *v;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

MetricCell macro_cell(const std::map<std::string, MetricCell>& per_dataset) {
  MetricCell macro;
  std::vector<std::optional<double>> fcrs, srs, fasses, stops, fails;
  for (const auto& [dataset, cell] : per_dataset) {
    macro.n_feasible += cell.n_feasible;
    macro.n_infeasible += cell.n_infeasible;
    macro.false_positives += cell.false_positives;
    macro.tokens.early_stop_count += cell.tokens.early_stop_count;
    macro.tokens.task_failure_count += cell.tokens.task_failure_count;
    macro.tokens.false_positive_count += cell.tokens.false_positive_count;
    fcrs.push_back(cell.fcr);
    srs.push_back(cell.sr);
    fasses.push_back(cell.fass_score);
    stops.push_back(cell.tokens.early_stop_mean);
    fails.push_back(cell.tokens.task_failure_mean);
  }
  macro.fcr = mean_of_defined(fcrs);
  macro.sr = mean_of_defined(srs);
  macro.fass_score = mean_of_defined(fasses);
  macro.tokens.early_stop_mean = mean_of_defined(stops);
  macro.tokens.task_failure_mean = mean_of_defined(fails);
  if (macro.tokens.early_stop_mean && macro.tokens.task_failure_mean &&
      *macro.tokens.early_stop_mean > 0.0)
    macro.tokens.ratio = *macro.tokens.task_failure_mean / *macro.tokens.early_stop_mean;
  return macro;
}

}  // namespace

MetricReport build_metric_report(std::span<const EvaluationRecord> records) {
  MetricReport report;
  std::map<std::string, std::map<std::string, std::vector<EvaluationRecord>>> grouped;
  std::map<std::string, std::vector<EvaluationRecord>> pooled;
  for (const auto& r : records) {
    grouped[r.agent_id][r.dataset_id].push_back(r);
    pooled[r.agent_id].push_back(r);
  }
  for (const auto& [agent, datasets] : grouped) {
    AgentReport agent_report;
    for (const auto& [dataset, recs] : datasets)
      agent_report.per_dataset[dataset] = cell_from_records(recs);
    agent_report.micro = cell_from_records(pooled[agent]);
    agent_report.macro = macro_cell(agent_report.per_dataset);
    report.agents[agent] = std::move(agent_report);
  }
  std::vector<FrontierPoint> points;
  for (const auto& [agent, agent_report] : report.agents) {
    if (agent_report.macro.sr && agent_report.macro.fcr)
      points.push_back({agent, *agent_report.macro.sr, *agent_report.macro.fcr});
  }
  report.frontier = pareto_frontier(points);
  return report;
}

namespace {

json tokens_to_json(const TokenCostSummary& tokens) {
  json j;
  j["early_stop_count"] = tokens.early_stop_count;
  j["task_failure_count"] = tokens.task_failure_count;
  j["false_positive_count"] = tokens.false_positive_count;
  if (tokens.early_stop_mean) j["tc_early_stop"] = *tokens.early_stop_mean;
  if (tokens.task_failure_mean) j["tc_task_failure"] = *tokens.task_failure_mean;
  if (tokens.ratio) j["ratio"] = *tokens.ratio;
  return j;
}

json cell_to_json(const MetricCell& cell) {
  json j;
  j["n_feasible"] = cell.n_feasible;
  j["n_infeasible"] = cell.n_infeasible;
  j["false_positives"] = cell.false_positives;
  if (cell.fcr) j["fcr"] = *cell.fcr;
  if (cell.sr) j["sr"] = *cell.sr;
  if (cell.fass_score) j["fass"] = *cell.fass_score;
  j["tokens"] = tokens_to_json(cell.tokens);
  return j;
}

TokenCostSummary tokens_from_json(const json& j) {
  TokenCostSummary tokens;
  tokens.early_stop_count = j.value("early_stop_count", 0LL);
  tokens.task_failure_count = j.value("task_failure_count", 0LL);
  tokens.false_positive_count = j.value("false_positive_count", 0LL);
  if (j.contains("tc_early_stop")) tokens.early_stop_mean = j["tc_early_stop"].get<double>();
  if (j.contains("tc_task_failure")) tokens.task_failure_mean = j["tc_task_failure"].get<double>();
  if (j.contains("ratio")) tokens.ratio = j["ratio"].get<double>();
  return tokens;
}

MetricCell cell_from_json(const json& j) {
  MetricCell cell;
  cell.n_feasible = j.value("n_feasible", 0LL);
  cell.n_infeasible = j.value("n_infeasible", 0LL);
  cell.false_positives = j.value("false_positives", 0LL);
  if (j.contains("fcr")) cell.fcr = j["fcr"].get<double>();
  if (j.contains("sr")) cell.sr = j["sr"].get<double>();
  if (j.contains("fass")) cell.fass_score = j["fass"].get<double>();
  if (j.contains("tokens")) cell.tokens = tokens_from_json(j["tokens"]);
  return cell;
}

}  // namespace

std::string report_to_json(const MetricReport& report) {
  json j;
  j["schema_version"] = 1;
  json agents = json::object();
  for (const auto& [agent, agent_report] : report.agents) {
    json a;
    json datasets = json::object();
    for (const auto& [dataset, cell] : agent_report.per_dataset)
      datasets[dataset] = cell_to_json(cell);
    a["datasets"] = datasets;
    a["micro"] = cell_to_json(agent_report.micro);
    a["macro"] = cell_to_json(agent_report.macro);
    agents[agent] = a;
  }
  j["agents"] = agents;
  json frontier = json::array();
  for (const auto& p : report.frontier)
    frontier.push_back({{"agent_id", p.agent_id}, {"sr", p.sr}, {"fcr", p.fcr}});
  j["frontier"] = frontier;
  return j.dump(2) + "\n";
}

MetricReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("report_from_json: ") + e.what());
  }
  MetricReport report;
  for (const auto& [agent, a] : j.at("agents").items()) {
    AgentReport agent_report;
    for (const auto& [dataset, cell] : a.at("datasets").items())
      agent_report.per_dataset[dataset] = cell_from_json(cell);
    agent_report.micro = cell_from_json(a.at("micro"));
    agent_report.macro = cell_from_json(a.at("macro"));
    report.agents[agent] = std::move(agent_report);
  }
  for (const auto& p : j.value("frontier", json::array()))
    report.frontier.push_back(
        {p.at("agent_id").get<std::string>(), p.at("sr").get<double>(), p.at("fcr").get<double>()});
  return report;
}

namespace {

std::string fmt_pct(const std::optional<double>& value) {
  if (!value) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(1) << round_half_up(*value * 100.0, 1);
  return out.str();
}

std::string fmt_tokens(const std::optional<double>& value) {
  if (!value) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(1) << round_half_up(*value, 1);
  return out.str();
}

std::string fmt_ratio(const std::optional<double>& value) {
  if (!value) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << round_half_up(*value, 2) << "x";
  return out.str();
}

std::vector<std::string> dataset_columns(const MetricReport& report) {
  std::set<std::string> names;
  for (const auto& [agent, agent_report] : report.agents)
    for (const auto& [dataset, cell] : agent_report.per_dataset) names.insert(dataset);
  return {names.begin(), names.end()};
}

void render_rate_table(std::ostringstream& out, const MetricReport& report,
                       const std::vector<std::string>& datasets, const std::string& title,
                       std::optional<double> MetricCell::* field) {
  out << title << "\n";
  out << std::left << std::setw(28) << "Agent";
  for (const auto& d : datasets) out << std::right << std::setw(12) << d;
  out << std::right << std::setw(12) << "Avg." << "\n";
  for (const auto& [agent, agent_report] : report.agents) {
    out << std::left << std::setw(28) << agent;
    for (const auto& d : datasets) {
      auto it = agent_report.per_dataset.find(d);
      out << std::right << std::setw(12)
          << (it == agent_report.per_dataset.end() ? "-" : fmt_pct(it->second.*field));
    }
    out << std::right << std::setw(12) << fmt_pct(agent_report.macro.*field) << "\n";
  }
  out << "\n";
}

}  // namespace

std::string render_report_tables(const MetricReport& report) {
  std::ostringstream out;
  const auto datasets = dataset_columns(report);

  render_rate_table(out, report, datasets, "Success Rate (%) on feasible tasks", &MetricCell::sr);
  render_rate_table(out, report, datasets, "False Continue Rate (%) on infeasible tasks",
                    &MetricCell::fcr);
  render_rate_table(out, report, datasets, "FASS (%)", &MetricCell::fass_score);

  out << "Token cost on infeasible tasks (macro means)\n";
  out << std::left << std::setw(28) << "Agent" << std::right << std::setw(16) << "TC-early-stop"
      << std::setw(16) << "TC-task-failure" << std::setw(10) << "Ratio" << "\n";
  for (const auto& [agent, agent_report] : report.agents) {
    const auto& tokens = agent_report.macro.tokens;
    out << std::left << std::setw(28) << agent << std::right << std::setw(16)
        << fmt_tokens(tokens.early_stop_mean) << std::setw(16)
        << fmt_tokens(tokens.task_failure_mean) << std::setw(10) << fmt_ratio(tokens.ratio)
        << "\n";
  }
  out << "\n";

  out << "False positives (infeasible tasks completed)\n";
  out << std::left << std::setw(28) << "Agent";
  for (const auto& d : datasets) out << std::right << std::setw(12) << d;
  out << std::right << std::setw(12) << "Total" << "\n";
  for (const auto& [agent, agent_report] : report.agents) {
    out << std::left << std::setw(28) << agent;
    for (const auto& d : datasets) {
      auto it = agent_report.per_dataset.find(d);
      out << std::right << std::setw(12)
          << (it == agent_report.per_dataset.end() ? "-"
                                                   : std::to_string(it->second.false_positives));
    }
    out << std::right << std::setw(12) << agent_report.macro.false_positives << "\n";
  }
  out << "\n";

  out << "Pareto frontier (maximize SR, minimize FCR, macro averages)\n";
  for (const auto& p : report.frontier) {
    out << "  " << p.agent_id << "  SR=" << fmt_pct(p.sr) << "  FCR=" << fmt_pct(p.fcr) << "\n";
  }
  return out.str();
}

}  // namespace feasikit::metrics
