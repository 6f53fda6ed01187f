#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "feasikit/common.hpp"

namespace feasikit::trace_store {

enum class Outcome { success, failure, stopped, turn_cap_exceeded };

std::string to_string(Outcome value);
Outcome outcome_from_string(const std::string& text);

struct ToolCallStep {
  int turn = 0;
  std::string tool_name;
  std::string arguments;  // serialized argument map
  std::string result;     // serialized tool output or error marker
  long long tokens_in = 0;
  long long tokens_out = 0;

  bool operator==(const ToolCallStep&) const = default;
};

struct MessageTurn {
  int turn = 0;
  std::string role;
  std::string text;
  long long tokens_in = 0;
  long long tokens_out = 0;

  bool operator==(const MessageTurn&) const = default;
};

struct ExecutionTrace {
  std::string trace_id;
  std::string task_id;
  std::string agent_id;
  std::vector<ToolCallStep> steps;
  std::vector<MessageTurn> messages;
  Outcome outcome = Outcome::failure;
  Feasibility decision = Feasibility::feasible;
  std::string stop_reason;  // non-empty iff decision == infeasible

  bool operator==(const ExecutionTrace&) const = default;
};

struct TokenCost {
  long long total = 0;
};

// Sum of tokens_in + tokens_out over all steps and messages.
TokenCost total_tokens(const ExecutionTrace& trace);

// Append-only JSONL recorder, one file per run. Records carry the trace id,
// so distinct traces may interleave; a trace becomes immutable at finalize.
class TraceWriter {
 public:
  explicit TraceWriter(std::filesystem::path file);

  void open_trace(const std::string& trace_id, const std::string& task_id,
                  const std::string& agent_id);
  void append_step(const std::string& trace_id, const ToolCallStep& step);
  void append_message(const std::string& trace_id, const MessageTurn& message);
  ExecutionTrace finalize_trace(const std::string& trace_id, Outcome outcome,
                                Feasibility decision,
                                const std::optional<std::string>& stop_reason = std::nullopt);

  const std::filesystem::path& path() const { return file_; }

 private:
  struct OpenTrace {
    ExecutionTrace trace;
    int last_turn = 0;
    bool finalized = false;
  };

  OpenTrace& open_trace_state(const std::string& trace_id);
  void write_line(const std::string& line);

  std::filesystem::path file_;
  std::map<std::string, OpenTrace> traces_;
  std::mutex mutex_;
};

// Reads back every finalized trace, in file order. Unfinalized fragments
// (crashed attempts) are dropped.
std::vector<ExecutionTrace> read_traces(const std::filesystem::path& file);

// Resolves retries: for each (task_id, agent_id) keeps the last finalized
// trace in file order. Attempt suffixes ("#2", ...) on trace ids are ignored
// for grouping.
std::map<std::pair<std::string, std::string>, ExecutionTrace> latest_by_task_agent(
    const std::vector<ExecutionTrace>& traces);

}  // namespace feasikit::trace_store
