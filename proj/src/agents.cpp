#include "feasikit/agents.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "json.hpp"

namespace feasikit::agents {

namespace {

using nlohmann::json;
using task_model::Task;
using task_model::ToolSpec;
using trace_store::ExecutionTrace;
using trace_store::MessageTurn;
using trace_store::Outcome;
using trace_store::ToolCallStep;
using trace_store::TraceWriter;

std::vector<std::string> split_ws(const std::string& text) {
  std::vector<std::string> parts;
  std::istringstream in(text);
  std::string part;
  while (in >> part) parts.push_back(part);
  return parts;
}

std::string to_lower(const std::string& text) {
  std::string out = text;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

// Typographic apostrophes fold to ASCII so phrase patterns match either form.
std::string normalize_quotes(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x99) {
      out.push_back('\'');
      i += 2;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

}  // namespace

std::string to_string(RefusalStyle style) {
  switch (style) {
    case RefusalStyle::explicit_stop: return "explicit_stop";
    case RefusalStyle::soft_refusal: return "soft_refusal";
    case RefusalStyle::keep_trying: return "keep_trying";
  }
  return "keep_trying";
}

RefusalStyle refusal_style_from_string(const std::string& text) {
  if (text == "explicit_stop") return RefusalStyle::explicit_stop;
  if (text == "soft_refusal") return RefusalStyle::soft_refusal;
  if (text == "keep_trying") return RefusalStyle::keep_trying;
  throw ConfigError("unknown refusal style: '" + text + "'");
}

std::vector<StopPattern> default_stop_patterns() {
  using Kind = StopPattern::Kind;
  return {
      {"stop-prefix", Kind::stop_prefix, "STOP:"},
      {"eq-required-tool-unavailable", Kind::phrase, "required tool is not available"},
      {"eq-cannot-complete-with-tools", Kind::phrase, "cannot be completed with the available tools"},
      {"eq-no-tool-contraction", Kind::phrase, "don't have a tool"},
      {"eq-no-tool-plain", Kind::phrase, "do not have a tool"},
      {"eq-no-tool-available", Kind::phrase, "no tool available"},
  };
}

const std::string& default_feasibility_prompt() {
  static const std::string prompt =
      "You are a helpful assistant that solves user tasks by calling the provided tools. "
      "Think step by step.\n"
      "\n"
      "IMPORTANT: Before attempting execution, assess whether the task can be completed with "
      "the available tools.\n"
      "- If the task IS feasible: proceed and call the necessary tools.\n"
      "- If the task IS NOT feasible (a required tool is missing or unavailable): respond ONLY "
      "with:\n"
      "  STOP: <brief explanation of which capability is missing>\n"
      "Do NOT substitute missing tools with internal knowledge.\n"
      "Do NOT attempt workarounds using unrelated tools.\n"
      "\n"
      "When the task is fully complete, summarise the outcome in a final message without "
      "calling any tools.\n";
  return prompt;
}

int default_turn_cap(const std::string& dataset_id) {
  std::string normalized;
  for (size_t i = 0; i < dataset_id.size(); ++i) {
    // Greek tau folds to "tau".
    if (i + 1 < dataset_id.size() && static_cast<unsigned char>(dataset_id[i]) == 0xCF &&
        static_cast<unsigned char>(dataset_id[i + 1]) == 0x84) {
      normalized += "tau";
      ++i;
      continue;
    }
    const unsigned char ch = static_cast<unsigned char>(dataset_id[i]);
    if (std::isalnum(ch)) normalized.push_back(static_cast<char>(std::tolower(ch)));
  }
  if (normalized == "bfcl") return 10;
  if (normalized == "stabletoolbench") return 10;
  if (normalized == "apibank") return 12;
  if (normalized == "taubench") return 15;
  return 10;
}

std::optional<StopSignal> detect_stop(const std::string& message,
                                      const std::vector<StopPattern>& patterns) {
  const std::string normalized = normalize_quotes(message);

  // Primary prefix patterns first; they win ties over phrase equivalents.
  for (const auto& pattern : patterns) {
    if (pattern.kind != StopPattern::Kind::stop_prefix) continue;
    std::istringstream lines(normalized);
    std::string line;
    while (std::getline(lines, line)) {
      const std::string lead = trim(line);
      if (lead.rfind(pattern.text, 0) == 0)
        return StopSignal{trim(lead.substr(pattern.text.size())), pattern.id};
    }
  }
  const std::string lowered = to_lower(normalized);
  for (const auto& pattern : patterns) {
    if (pattern.kind != StopPattern::Kind::phrase) continue;
    const auto pos = lowered.find(to_lower(pattern.text));
    if (pos == std::string::npos) continue;
    // Reason is the matched line, trimmed.
    auto begin = normalized.rfind('\n', pos);
    begin = begin == std::string::npos ? 0 : begin + 1;
    auto end = normalized.find('\n', pos);
    if (end == std::string::npos) end = normalized.size();
    return StopSignal{trim(normalized.substr(begin, end - begin)), pattern.id};
  }
  return std::nullopt;
}

ToolEnvironment::ToolEnvironment(std::vector<ToolSpec> pool) : pool_(std::move(pool)) {
  for (const auto& tool : pool_) names_.insert(tool.name);
}

bool ToolEnvironment::has(const std::string& name) const { return names_.count(name) > 0; }

ToolEnvironment::CallResult ToolEnvironment::call(const std::string& name,
                                                  const std::string& arguments) const {
  (void)arguments;
  CallResult result;
  if (!has(name)) {
    result.found = false;
    result.output = json{{"error", "tool not found"}, {"ok", false}, {"tool", name}}.dump();
    return result;
  }
  result.found = true;
  result.output =
      json{{"ok", true}, {"output", name + " executed successfully"}, {"tool", name}}.dump();
  return result;
}

std::string ToolEnvironment::listing() const {
  std::string text = "Available tools:";
  for (const auto& tool : pool_) text += "\n- " + tool.name + ": " + tool.description;
  return text;
}

SuccessOracle tool_sequence_oracle() {
  return [](const Task& task, const ExecutionTrace& trace) {
    if (trace.outcome == Outcome::stopped || trace.decision == Feasibility::infeasible)
      return false;
    if (trace.messages.empty()) return false;  // no final report emitted
    std::set<std::string> resolved;
    bool any_failed = false;
    for (const auto& step : trace.steps) {
      if (step.result.find("tool not found") == std::string::npos)
        resolved.insert(step.tool_name);
      else
        any_failed = true;
    }
    auto required = task.ground_truth.find("required_tools");
    if (required != task.ground_truth.end()) {
      for (const auto& name : split_ws(required->second))
        if (!resolved.count(name)) return false;
      return true;
    }
    return !any_failed;
  };
}

SuccessOracle answer_match_oracle() {
  return [](const Task& task, const ExecutionTrace& trace) {
    if (trace.outcome == Outcome::stopped || trace.decision == Feasibility::infeasible)
      return false;
    auto answer = task.ground_truth.find("answer");
    if (answer == task.ground_truth.end() || answer->second.empty()) return false;
    for (auto it = trace.messages.rbegin(); it != trace.messages.rend(); ++it)
      if (it->text.find(answer->second) != std::string::npos) return true;
    return false;
  };
}

SuccessOracle oracle_by_name(const std::string& name) {
  if (name == "tool_sequence" || name.empty()) return tool_sequence_oracle();
  if (name == "answer_match") return answer_match_oracle();
  throw ConfigError("unknown success oracle: '" + name + "'");
}

namespace {

// Shared recorder: mirrors every appended record into a local trace so the
// oracle can inspect the run before finalize.
class TraceBuilder {
 public:
  TraceBuilder(TraceWriter& writer, const std::string& trace_id, const std::string& task_id,
               const std::string& agent_id)
      : writer_(writer) {
    writer_.open_trace(trace_id, task_id, agent_id);
    local_.trace_id = trace_id;
    local_.task_id = task_id;
    local_.agent_id = agent_id;
  }

  void add_step(const std::string& tool, const std::string& arguments, const std::string& result,
                long long tokens_in, long long tokens_out) {
    ToolCallStep step{next_turn(), tool, arguments, result, tokens_in, tokens_out};
    writer_.append_step(local_.trace_id, step);
    local_.steps.push_back(step);
  }

  void add_message(const std::string& role, const std::string& text, long long tokens_in,
                   long long tokens_out) {
    MessageTurn message{next_turn(), role, text, tokens_in, tokens_out};
    writer_.append_message(local_.trace_id, message);
    local_.messages.push_back(message);
  }

  ExecutionTrace finalize(Outcome outcome, Feasibility decision,
                          const std::optional<std::string>& reason = std::nullopt) {
    return writer_.finalize_trace(local_.trace_id, outcome, decision, reason);
  }

  const ExecutionTrace& local() const { return local_; }

 private:
  int next_turn() { return ++turn_; }

  TraceWriter& writer_;
  ExecutionTrace local_;
  int turn_ = 0;
};

struct ResolvedScript {
  std::vector<std::string> required;
  std::vector<std::string> sequence;  // required followed by optional extras
};

ResolvedScript resolve_script(const AgentSpec& agent, const Task& task,
                              const ToolEnvironment& env) {
  ResolvedScript script;
  const auto& policy = agent.scripted;
  if (!policy.follow_ground_truth) {
    script.required = policy.sequence;
    script.sequence = policy.sequence;
    return script;
  }
  auto required = task.ground_truth.find("required_tools");
  if (required != task.ground_truth.end()) script.required = split_ws(required->second);
  script.sequence = script.required;

  // Agent-specific optional extras, disjoint across the roster.
  std::set<std::string> required_set(script.required.begin(), script.required.end());
  std::vector<std::string> optional_tools;
  for (const auto& tool : env.pool())
    if (!required_set.count(tool.name)) optional_tools.push_back(tool.name);
  std::sort(optional_tools.begin(), optional_tools.end());
  const int stride = std::max(1, agent.roster_size);
  int taken = 0;
  for (size_t i = 0; i < optional_tools.size() && taken < policy.extra_tools; ++i) {
    if (static_cast<int>(i) % stride == agent.ordinal % stride) {
      script.sequence.push_back(optional_tools[i]);
      ++taken;
    }
  }
  return script;
}

std::string refusal_text(RefusalStyle style, const std::string& missing_tool) {
  if (style == RefusalStyle::explicit_stop)
    return "STOP: the required tool '" + missing_tool + "' is missing from the available tools.";
  return "The required tool is not available ('" + missing_tool +
         "'), so this task cannot be completed with the available tools.";
}

std::string completion_text(const Task& task) {
  auto answer = task.ground_truth.find("answer");
  if (answer != task.ground_truth.end() && !answer->second.empty())
    return "Task complete. Result: " + answer->second;
  return "Task complete.";
}

const char* kFailureText =
    "I finished my attempts, but some calls did not go through and the request is left "
    "unfinished.";

struct LoopResult {
  enum class Kind { stopped, final_answer, budget_exhausted } kind = Kind::budget_exhausted;
  StopSignal stop;
  std::string stop_text;
  bool any_failed = false;
  std::vector<std::string> failed_tools;
};

// Drives one scripted agent for up to `budget` assistant turns, appending to
// the shared trace. `role` separates single-agent and executor turns.
// tokens_in per turn is the full context visible at that turn (the agent
// re-reads its whole conversation each call, like provider usage reports).
LoopResult run_scripted_loop(const AgentSpec& agent, const Task& task, const RunConfig& config,
                             ToolEnvironment& env, TraceBuilder& builder, int budget,
                             long long initial_context, const std::string& role) {
  const auto& policy = agent.scripted;
  const auto script = resolve_script(agent, task, env);
  LoopResult result;
  long long context = initial_context;
  int turns = 0;

  const bool refuses = policy.stop_aware && policy.style != RefusalStyle::keep_trying;
  if (refuses && turns < budget) {
    std::string missing;
    for (const auto& name : script.required) {
      if (!env.has(name)) {
        missing = name;
        break;
      }
    }
    if (!missing.empty()) {
      const std::string text = refusal_text(policy.style, missing);
      ++turns;
      builder.add_message(role, text, context, estimate_tokens(text));
      auto signal = detect_stop(text, config.stop_patterns);
      result.kind = LoopResult::Kind::stopped;
      result.stop = signal ? *signal : StopSignal{text, ""};
      result.stop_text = text;
      return result;
    }
  }

  if (policy.memorize_ground_truth && turns < budget) {
    const std::string text = completion_text(task);
    ++turns;
    builder.add_message(role, text, context, estimate_tokens(text));
    result.kind = LoopResult::Kind::final_answer;
    return result;
  }

  size_t index = 0;
  size_t retry = 0;
  while (turns < budget) {
    std::string tool;
    if (index < script.sequence.size()) {
      tool = script.sequence[index++];
    } else if (!result.failed_tools.empty() && policy.style == RefusalStyle::keep_trying) {
      tool = result.failed_tools[retry % result.failed_tools.size()];
      ++retry;
    } else {
      const std::string text =
          result.failed_tools.empty() ? completion_text(task) : kFailureText;
      ++turns;
      builder.add_message(role, text, context, estimate_tokens(text));
      if (auto signal = detect_stop(text, config.stop_patterns)) {
        result.kind = LoopResult::Kind::stopped;
        result.stop = *signal;
        result.stop_text = text;
        return result;
      }
      result.kind = LoopResult::Kind::final_answer;
      result.any_failed = !result.failed_tools.empty();
      return result;
    }

    const std::string arguments = "{}";
    const auto call = env.call(tool, arguments);
    ++turns;
    const long long call_tokens = estimate_tokens(tool + " " + arguments);
    builder.add_step(tool, arguments, call.output, context, call_tokens);
    context += call_tokens + estimate_tokens(call.output);
    if (!call.found &&
        std::find(result.failed_tools.begin(), result.failed_tools.end(), tool) ==
            result.failed_tools.end())
      result.failed_tools.push_back(tool);
  }
  result.kind = LoopResult::Kind::budget_exhausted;
  result.any_failed = !result.failed_tools.empty();
  return result;
}

// Remote agent loop over the chat-completions client.
LoopResult run_remote_loop(const AgentSpec& agent, const RunConfig& config, ToolEnvironment& env,
                           TraceBuilder& builder, int budget,
                           std::vector<ChatMessage> conversation, const std::string& role) {
  LoopResult result;
  int turns = 0;
  while (turns < budget) {
    AssistantTurn turn = complete_turn(agent.remote, conversation, env.pool());
    ++turns;
    long long tokens_in = turn.usage.tokens_in;
    long long tokens_out = turn.usage.tokens_out;
    if (!turn.message.tool_calls.empty()) {
      conversation.push_back(turn.message);
      bool first = true;
      for (const auto& call : turn.message.tool_calls) {
        std::string output;
        if (call.name.empty()) {
          output = R"({"error":"malformed tool-call payload","ok":false})";
          if (std::find(result.failed_tools.begin(), result.failed_tools.end(), "<malformed>") ==
              result.failed_tools.end())
            result.failed_tools.push_back("<malformed>");
        } else {
          const auto call_result = env.call(call.name, call.arguments);
          output = call_result.output;
          if (!call_result.found &&
              std::find(result.failed_tools.begin(), result.failed_tools.end(), call.name) ==
                  result.failed_tools.end())
            result.failed_tools.push_back(call.name);
        }
        builder.add_step(call.name.empty() ? "<malformed>" : call.name, call.arguments, output,
                         first ? tokens_in : 0, first ? tokens_out : 0);
        first = false;
        conversation.push_back(ChatMessage{"tool", output, {}, call.id});
      }
      continue;
    }
    builder.add_message(role, turn.message.content, tokens_in, tokens_out);
    conversation.push_back(turn.message);
    if (auto signal = detect_stop(turn.message.content, config.stop_patterns)) {
      result.kind = LoopResult::Kind::stopped;
      result.stop = *signal;
      result.stop_text = turn.message.content;
      return result;
    }
    result.kind = LoopResult::Kind::final_answer;
    result.any_failed = !result.failed_tools.empty();
    return result;
  }
  result.kind = LoopResult::Kind::budget_exhausted;
  result.any_failed = !result.failed_tools.empty();
  return result;
}

LoopResult run_agent_loop(const AgentSpec& agent, const Task& task, const RunConfig& config,
                          ToolEnvironment& env, TraceBuilder& builder, int budget,
                          long long initial_context, std::vector<ChatMessage> conversation,
                          const std::string& role) {
  if (agent.kind == AgentKind::scripted)
    return run_scripted_loop(agent, task, config, env, builder, budget, initial_context, role);
  return run_remote_loop(agent, config, env, builder, budget, std::move(conversation), role);
}

std::string stop_reason_from(const LoopResult& result) {
  if (!result.stop.reason.empty()) return result.stop.reason;
  if (!result.stop_text.empty()) return result.stop_text;
  return "infeasibility declared";
}

}  // namespace

ExecutionTrace run_single_agent(const AgentSpec& agent, const Task& task, const RunConfig& config,
                                ToolEnvironment& env, TraceWriter& writer,
                                const SuccessOracle& oracle, const std::string& trace_id) {
  const std::string id = trace_id.empty() ? task.task_id + "__" + agent.agent_id : trace_id;
  TraceBuilder builder(writer, id, task.task_id, agent.agent_id);

  const long long context = estimate_tokens(config.feasibility_prompt) +
                            estimate_tokens(task.query) + estimate_tokens(env.listing());
  std::vector<ChatMessage> conversation = {
      {"system", config.feasibility_prompt, {}, ""},
      {"user", task.query, {}, ""},
  };

  LoopResult result;
  try {
    result = run_agent_loop(agent, task, config, env, builder, config.max_turns, context,
                            std::move(conversation), "assistant");
  } catch (const TransportError& e) {
    builder.add_message("system", std::string("transport error: ") + e.what(), 0, 0);
    return builder.finalize(Outcome::failure, Feasibility::feasible);
  }

  switch (result.kind) {
    case LoopResult::Kind::stopped:
      return builder.finalize(Outcome::stopped, Feasibility::infeasible,
                              stop_reason_from(result));
    case LoopResult::Kind::final_answer: {
      const bool ok = oracle(task, builder.local());
      return builder.finalize(ok ? Outcome::success : Outcome::failure, Feasibility::feasible);
    }
    case LoopResult::Kind::budget_exhausted:
    default:
      return builder.finalize(Outcome::turn_cap_exceeded, Feasibility::feasible);
  }
}

namespace {

const std::string& planner_prompt() {
  static const std::string prompt =
      "You are the planner in a planner-executor pair. Read the user task and the available "
      "tools. First decide whether the task can be completed with the available tools.\n"
      "- If a required capability is missing, respond ONLY with:\n"
      "  STOP: <brief explanation of which capability is missing>\n"
      "- Otherwise respond with a JSON object of the form\n"
      "  {\"required_capabilities\": [\"tool_a\", \"tool_b\"], \"steps\": [\"...\"]}\n";
  return prompt;
}

std::string plan_text(const ResolvedScript& script) {
  json plan;
  plan["required_capabilities"] = script.required;
  json steps = json::array();
  for (const auto& name : script.sequence) steps.push_back("call " + name);
  plan["steps"] = steps;
  return plan.dump();
}

struct PlannerTurn {
  bool stopped = false;
  StopSignal stop;
  std::string text;
};

PlannerTurn scripted_planner_turn(const AgentSpec& planner, const Task& task,
                                  const RunConfig& config, ToolEnvironment& env,
                                  TraceBuilder& builder, int round, long long context,
                                  const std::optional<LoopResult>& previous_pass) {
  const auto& policy = planner.scripted;
  const auto script = resolve_script(planner, task, env);
  const bool refuses = policy.stop_aware && policy.style != RefusalStyle::keep_trying;

  PlannerTurn turn;
  std::string text;
  if (round == 1) {
    std::string missing;
    for (const auto& name : script.required) {
      if (!env.has(name)) {
        missing = name;
        break;
      }
    }
    text = (refuses && !missing.empty()) ? refusal_text(policy.style, missing)
                                         : plan_text(script);
  } else {
    // Review round: the executor failed or ran out of budget.
    if (refuses) {
      text = policy.style == RefusalStyle::explicit_stop
                 ? "STOP: the executor could not complete the task; a required capability "
                   "appears to be missing."
                 : "The executor could not finish; the required tool is not available, so this "
                   "task cannot be completed with the available tools.";
    } else {
      json plan = json::parse(plan_text(script));
      plan["revised"] = true;
      if (previous_pass && !previous_pass->failed_tools.empty())
        plan["avoid"] = previous_pass->failed_tools;
      text = plan.dump();
    }
  }
  builder.add_message("planner", text, context, estimate_tokens(text));
  if (auto signal = detect_stop(text, config.stop_patterns)) {
    turn.stopped = true;
    turn.stop = *signal;
  }
  turn.text = text;
  return turn;
}

PlannerTurn remote_planner_turn(const AgentSpec& planner, const Task& task,
                                const RunConfig& config, ToolEnvironment& env,
                                TraceBuilder& builder, int round,
                                const std::string& review_context) {
  std::vector<ChatMessage> conversation = {{"system", planner_prompt(), {}, ""}};
  std::string user = task.query + "\n\n" + env.listing();
  if (round > 1) user += "\n\n" + review_context;
  conversation.push_back({"user", user, {}, ""});

  AssistantTurn assistant = complete_turn(planner.remote, conversation, {});
  builder.add_message("planner", assistant.message.content, assistant.usage.tokens_in,
                      assistant.usage.tokens_out);
  PlannerTurn turn;
  turn.text = assistant.message.content;
  if (auto signal = detect_stop(assistant.message.content, config.stop_patterns)) {
    turn.stopped = true;
    turn.stop = *signal;
  }
  return turn;
}

std::string pass_summary(const LoopResult& pass) {
  std::string summary = "Executor report: ";
  switch (pass.kind) {
    case LoopResult::Kind::final_answer:
      summary += pass.any_failed ? "finished with failed tool calls" : "task completed";
      break;
    case LoopResult::Kind::budget_exhausted: summary += "ran out of executor turns"; break;
    case LoopResult::Kind::stopped: summary += "declared the task infeasible"; break;
  }
  if (!pass.failed_tools.empty()) {
    summary += "; unresolved tools:";
    for (const auto& name : pass.failed_tools) summary += " " + name;
  }
  return summary;
}

}  // namespace

ExecutionTrace run_planner_executor(const AgentSpec& planner, const AgentSpec& executor,
                                    const Task& task, const RunConfig& config,
                                    ToolEnvironment& env, TraceWriter& writer,
                                    const SuccessOracle& oracle, const std::string& trace_id) {
  const std::string pair_id = planner.agent_id + "+" + executor.agent_id;
  const std::string id = trace_id.empty() ? task.task_id + "__" + pair_id : trace_id;
  TraceBuilder builder(writer, id, task.task_id, pair_id);

  // The planner re-reads its whole conversation on every round.
  long long planner_context = estimate_tokens(planner_prompt()) + estimate_tokens(task.query) +
                              estimate_tokens(env.listing());

  std::optional<LoopResult> last_pass;
  try {
    for (int round = 1; round <= config.planner_rounds; ++round) {
      if (last_pass && last_pass->kind == LoopResult::Kind::final_answer &&
          !last_pass->any_failed) {
        const std::string approval = "APPROVED: task complete.";
        builder.add_message("planner", approval,
                            planner_context + estimate_tokens(pass_summary(*last_pass)),
                            estimate_tokens(approval));
        break;
      }
      const std::string review = last_pass ? pass_summary(*last_pass) : "";
      if (round > 1) planner_context += estimate_tokens(review);
      PlannerTurn turn;
      if (planner.kind == AgentKind::scripted) {
        turn = scripted_planner_turn(planner, task, config, env, builder, round, planner_context,
                                     last_pass);
      } else {
        turn = remote_planner_turn(planner, task, config, env, builder, round, review);
      }
      planner_context += estimate_tokens(turn.text);
      if (turn.stopped) {
        const std::string reason =
            !turn.stop.reason.empty() ? turn.stop.reason : turn.text;
        return builder.finalize(Outcome::stopped, Feasibility::infeasible, reason);
      }

      const long long executor_context = estimate_tokens(turn.text) +
                                         estimate_tokens(task.query) +
                                         estimate_tokens(env.listing());
      std::vector<ChatMessage> conversation = {
          {"system", config.feasibility_prompt, {}, ""},
          {"user", task.query + "\n\nPlan from the planner:\n" + turn.text, {}, ""},
      };
      LoopResult pass =
          run_agent_loop(executor, task, config, env, builder, config.max_executor_turns,
                         executor_context, std::move(conversation), "executor");
      if (pass.kind == LoopResult::Kind::stopped)
        return builder.finalize(Outcome::stopped, Feasibility::infeasible,
                                stop_reason_from(pass));
      last_pass = std::move(pass);
    }
  } catch (const TransportError& e) {
    builder.add_message("system", std::string("transport error: ") + e.what(), 0, 0);
    return builder.finalize(Outcome::failure, Feasibility::feasible);
  }

  if (!last_pass) {
    // planner_rounds == 0; nothing ran
    return builder.finalize(Outcome::failure, Feasibility::feasible);
  }
  if (last_pass->kind == LoopResult::Kind::budget_exhausted)
    return builder.finalize(Outcome::turn_cap_exceeded, Feasibility::feasible);
  const bool ok = oracle(task, builder.local());
  return builder.finalize(ok ? Outcome::success : Outcome::failure, Feasibility::feasible);
}

}  // namespace feasikit::agents
