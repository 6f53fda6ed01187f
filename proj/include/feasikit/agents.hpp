#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "feasikit/task_model.hpp"
#include "feasikit/trace_store.hpp"

namespace feasikit::agents {

enum class RefusalStyle { explicit_stop, soft_refusal, keep_trying };

std::string to_string(RefusalStyle style);
RefusalStyle refusal_style_from_string(const std::string& text);

// Deterministic agent policy. `sequence` is the intended tool order; with
// follow_ground_truth the sequence comes from the task's ground_truth plus up
// to `extra_tools` optional extras chosen disjointly across a roster by
// (ordinal, roster_size). A keep_trying agent retries missing tools until the
// turn cap; the other styles refuse up front when stop_aware.
struct ScriptedPolicy {
  std::vector<std::string> sequence;
  bool follow_ground_truth = false;
  int extra_tools = 0;
  bool stop_aware = false;
  RefusalStyle style = RefusalStyle::keep_trying;
  bool memorize_ground_truth = false;  // answers directly from ground_truth, no tool calls
};

struct RemoteConfig {
  std::string endpoint;  // chat-completions URL, e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model;
  double temperature = 0.0;
  int max_response_tokens = 4096;
  std::string credential_env = "FEASIKIT_API_KEY";
  int max_retries = 3;
  int retry_initial_delay_ms = 100;
};

enum class AgentKind { scripted, remote };

struct AgentSpec {
  std::string agent_id;
  AgentKind kind = AgentKind::scripted;
  ScriptedPolicy scripted;
  RemoteConfig remote;
  int ordinal = 0;      // roster position
  int roster_size = 1;  // roster cardinality, for disjoint extras
};

struct StopPattern {
  enum class Kind { stop_prefix, phrase };
  std::string id;
  Kind kind = Kind::phrase;
  std::string text;
};

// Primary line-anchored "STOP:" plus the shipped equivalent phrasings.
std::vector<StopPattern> default_stop_patterns();

const std::string& default_feasibility_prompt();

// Per-benchmark turn caps; unknown datasets get 10.
int default_turn_cap(const std::string& dataset_id);

struct RunConfig {
  int max_turns = 10;
  std::string feasibility_prompt = default_feasibility_prompt();
  std::vector<StopPattern> stop_patterns = default_stop_patterns();
  int planner_rounds = 2;
  int max_executor_turns = 8;
};

struct StopSignal {
  std::string reason;
  std::string matched_pattern;
};

// Returns a signal iff the primary pattern (a line beginning with the literal
// token "STOP:", case sensitive) or any configured equivalent phrasing
// matches. The primary pattern wins ties and captures the trailing text.
std::optional<StopSignal> detect_stop(const std::string& message,
                                      const std::vector<StopPattern>& patterns);

// Simulated tool executor over a fixed pool. Calls to absent tools report
// "tool not found" and have no side effects.
class ToolEnvironment {
 public:
  explicit ToolEnvironment(std::vector<task_model::ToolSpec> pool);

  struct CallResult {
    bool found = false;
    std::string output;  // serialized result or error marker
  };

  bool has(const std::string& name) const;
  CallResult call(const std::string& name, const std::string& arguments) const;
  const std::vector<task_model::ToolSpec>& pool() const { return pool_; }
  std::string listing() const;

 private:
  std::vector<task_model::ToolSpec> pool_;
  std::set<std::string> names_;
};

// Decides task completion from the finished trace; pluggable because the
// source benchmarks never fix a common success check.
using SuccessOracle =
    std::function<bool(const task_model::Task&, const trace_store::ExecutionTrace&)>;

// Success iff every ground_truth required tool was invoked successfully (all
// calls must resolve when no required list is present) and a final answer was
// produced.
SuccessOracle tool_sequence_oracle();
// Success iff the last assistant message contains ground_truth["answer"].
SuccessOracle answer_match_oracle();
SuccessOracle oracle_by_name(const std::string& name);

trace_store::ExecutionTrace run_single_agent(const AgentSpec& agent,
                                             const task_model::Task& task,
                                             const RunConfig& config, ToolEnvironment& env,
                                             trace_store::TraceWriter& writer,
                                             const SuccessOracle& oracle,
                                             const std::string& trace_id = "");

// Two-round planner protocol: round 1 plans or stops; the executor runs up to
// max_executor_turns; round 2 reviews and may stop or replan for one final
// executor pass. All turns accrue to one trace.
trace_store::ExecutionTrace run_planner_executor(const AgentSpec& planner,
                                                 const AgentSpec& executor,
                                                 const task_model::Task& task,
                                                 const RunConfig& config, ToolEnvironment& env,
                                                 trace_store::TraceWriter& writer,
                                                 const SuccessOracle& oracle,
                                                 const std::string& trace_id = "");

// ---- chat-completions wire client ----------------------------------------

struct ToolCallRequest {
  std::string id;
  std::string name;
  std::string arguments;
};

struct ChatMessage {
  std::string role;
  std::string content;
  std::vector<ToolCallRequest> tool_calls;
  std::string tool_call_id;  // role == "tool" only
};

struct Usage {
  long long tokens_in = 0;
  long long tokens_out = 0;
  bool reported = false;  // false when estimated locally
};

struct AssistantTurn {
  ChatMessage message;
  Usage usage;
};

// One request/response cycle against a chat-completions endpoint. Transient
// transport failures are retried with exponential backoff up to
// config.max_retries; authentication failures surface immediately.
AssistantTurn complete_turn(const RemoteConfig& config,
                            const std::vector<ChatMessage>& conversation,
                            const std::vector<task_model::ToolSpec>& tools);

}  // namespace feasikit::agents
