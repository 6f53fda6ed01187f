#include "feasikit/trace_store.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace feasikit::trace_store {

namespace {

using nlohmann::json;

}  // namespace

std::string to_string(Outcome value) {
  switch (value) {
    case Outcome::success: return "success";
    case Outcome::failure: return "failure";
    case Outcome::stopped: return "stopped";
    case Outcome::turn_cap_exceeded: return "turn_cap_exceeded";
  }
  return "failure";
}

Outcome outcome_from_string(const std::string& text) {
  if (text == "success") return Outcome::success;
  if (text == "failure") return Outcome::failure;
  if (text == "stopped") return Outcome::stopped;
  if (text == "turn_cap_exceeded") return Outcome::turn_cap_exceeded;
  throw DataError("unknown outcome value: '" + text + "'");
}

TokenCost total_tokens(const ExecutionTrace& trace) {
  TokenCost cost;
  for (const auto& step : trace.steps) cost.total += step.tokens_in + step.tokens_out;
  for (const auto& message : trace.messages) cost.total += message.tokens_in + message.tokens_out;
  return cost;
}

TraceWriter::TraceWriter(std::filesystem::path file) : file_(std::move(file)) {
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
}

TraceWriter::OpenTrace& TraceWriter::open_trace_state(const std::string& trace_id) {
  auto it = traces_.find(trace_id);
  if (it == traces_.end()) throw DataError("trace not open: '" + trace_id + "'");
  if (it->second.finalized) throw DataError("trace already finalized: '" + trace_id + "'");
  return it->second;
}

void TraceWriter::write_line(const std::string& line) {
  std::ofstream out(file_, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot append to trace file: " + file_.string());
  out << line << "\n";
}

void TraceWriter::open_trace(const std::string& trace_id, const std::string& task_id,
                             const std::string& agent_id) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = traces_.try_emplace(trace_id);
  if (!inserted) throw DataError("trace already open: '" + trace_id + "'");
  it->second.trace.trace_id = trace_id;
  it->second.trace.task_id = task_id;
  it->second.trace.agent_id = agent_id;
}

void TraceWriter::append_step(const std::string& trace_id, const ToolCallStep& step) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& state = open_trace_state(trace_id);
  if (step.turn != state.last_turn + 1)
    throw DataError("non-monotone turn index for trace '" + trace_id + "': expected " +
                    std::to_string(state.last_turn + 1) + ", got " + std::to_string(step.turn));
  if (step.tokens_in < 0 || step.tokens_out < 0)
    throw DataError("negative token count for trace '" + trace_id + "'");
  state.last_turn = step.turn;
  state.trace.steps.push_back(step);
  json payload = {{"tool_name", step.tool_name},
                  {"arguments", step.arguments},
                  {"result", step.result}};
  json record = {{"trace_id", trace_id},
                 {"task_id", state.trace.task_id},
                 {"agent_id", state.trace.agent_id},
                 {"turn", step.turn},
                 {"kind", "tool_call"},
                 {"payload", payload},
                 {"tokens_in", step.tokens_in},
                 {"tokens_out", step.tokens_out}};
  write_line(record.dump());
}

void TraceWriter::append_message(const std::string& trace_id, const MessageTurn& message) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& state = open_trace_state(trace_id);
  if (message.turn != state.last_turn + 1)
    throw DataError("non-monotone turn index for trace '" + trace_id + "': expected " +
                    std::to_string(state.last_turn + 1) + ", got " + std::to_string(message.turn));
  if (message.tokens_in < 0 || message.tokens_out < 0)
    throw DataError("negative token count for trace '" + trace_id + "'");
  state.last_turn = message.turn;
  state.trace.messages.push_back(message);
  json payload = {{"role", message.role}, {"text", message.text}};
  json record = {{"trace_id", trace_id},
                 {"task_id", state.trace.task_id},
                 {"agent_id", state.trace.agent_id},
                 {"turn", message.turn},
                 {"kind", "message"},
                 {"payload", payload},
                 {"tokens_in", message.tokens_in},
                 {"tokens_out", message.tokens_out}};
  write_line(record.dump());
}

ExecutionTrace TraceWriter::finalize_trace(const std::string& trace_id, Outcome outcome,
                                           Feasibility decision,
                                           const std::optional<std::string>& stop_reason) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& state = open_trace_state(trace_id);

  const bool stopped = outcome == Outcome::stopped;
  const bool infeasible = decision == Feasibility::infeasible;
  if (stopped != infeasible)
    throw DataError("inconsistent finalize for trace '" + trace_id +
                    "': outcome=stopped must coincide with decision=infeasible");
  const bool has_reason = stop_reason.has_value() && !stop_reason->empty();
  if (infeasible != has_reason)
    throw DataError("inconsistent finalize for trace '" + trace_id +
                    "': stop_reason must be present exactly when decision=infeasible");

  state.trace.outcome = outcome;
  state.trace.decision = decision;
  state.trace.stop_reason = infeasible ? *stop_reason : "";
  state.finalized = true;

  json payload = {{"outcome", to_string(outcome)},
                  {"decision", to_string(decision)},
                  {"total_tokens", total_tokens(state.trace).total}};
  if (infeasible) payload["stop_reason"] = state.trace.stop_reason;
  json record = {{"trace_id", trace_id},
                 {"task_id", state.trace.task_id},
                 {"agent_id", state.trace.agent_id},
                 {"turn", state.last_turn},
                 {"kind", "final"},
                 {"payload", payload},
                 {"tokens_in", 0},
                 {"tokens_out", 0}};
  write_line(record.dump());
  return state.trace;
}

std::vector<ExecutionTrace> read_traces(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open trace file: " + file.string());

  std::map<std::string, ExecutionTrace> open;
  std::vector<std::string> order;
  std::vector<ExecutionTrace> finalized;

  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed trace record at " + file.string() + ":" +
                      std::to_string(line_no) + ": " + e.what());
    }
    const std::string trace_id = record.at("trace_id").get<std::string>();
    auto [it, inserted] = open.try_emplace(trace_id);
    if (inserted) {
      it->second.trace_id = trace_id;
      it->second.task_id = record.at("task_id").get<std::string>();
      it->second.agent_id = record.at("agent_id").get<std::string>();
      order.push_back(trace_id);
    }
    ExecutionTrace& trace = it->second;
    const std::string kind = record.at("kind").get<std::string>();
    const json& payload = record.at("payload");
    if (kind == "tool_call") {
      ToolCallStep step;
      step.turn = record.at("turn").get<int>();
      step.tool_name = payload.at("tool_name").get<std::string>();
      step.arguments = payload.at("arguments").get<std::string>();
      step.result = payload.at("result").get<std::string>();
      step.tokens_in = record.at("tokens_in").get<long long>();
      step.tokens_out = record.at("tokens_out").get<long long>();
      trace.steps.push_back(step);
    } else if (kind == "message") {
      MessageTurn message;
      message.turn = record.at("turn").get<int>();
      message.role = payload.at("role").get<std::string>();
      message.text = payload.at("text").get<std::string>();
      message.tokens_in = record.at("tokens_in").get<long long>();
      message.tokens_out = record.at("tokens_out").get<long long>();
      trace.messages.push_back(message);
    } else if (kind == "final") {
      trace.outcome = outcome_from_string(payload.at("outcome").get<std::string>());
      trace.decision = feasibility_from_string(payload.at("decision").get<std::string>());
      trace.stop_reason = payload.value("stop_reason", "");
      finalized.push_back(trace);
      open.erase(it);
    } else {
      throw DataError("unknown trace record kind '" + kind + "' at " + file.string() + ":" +
                      std::to_string(line_no));
    }
  }
  return finalized;
}

std::map<std::pair<std::string, std::string>, ExecutionTrace> latest_by_task_agent(
    const std::vector<ExecutionTrace>& traces) {
  std::map<std::pair<std::string, std::string>, ExecutionTrace> latest;
  for (const auto& trace : traces)
    latest[{trace.task_id, trace.agent_id}] = trace;
  return latest;
}

}  // namespace feasikit::trace_store
