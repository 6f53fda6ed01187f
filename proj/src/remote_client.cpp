#include <chrono>
#include <cstdlib>
#include <thread>

#include "feasikit/agents.hpp"
#include "httplib.h"
#include "json.hpp"

namespace feasikit::agents {

namespace {

using nlohmann::json;
using task_model::ParamType;
using task_model::ToolSpec;

std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  if (scheme == std::string::npos)
    throw ConfigError("remote endpoint must be an http(s) URL: '" + endpoint + "'");
  const auto path_start = endpoint.find('/', scheme + 3);
  if (path_start == std::string::npos) return {endpoint, "/v1/chat/completions"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

json json_schema_type(const task_model::ParamSpec& spec) {
  json out;
  switch (spec.type) {
    case ParamType::string_type: out["type"] = "string"; break;
    case ParamType::number: out["type"] = "number"; break;
    case ParamType::boolean: out["type"] = "boolean"; break;
    case ParamType::object: out["type"] = "object"; break;
    case ParamType::array: out["type"] = "array"; break;
    case ParamType::enumeration:
      out["type"] = "string";
      out["enum"] = spec.enum_values;
      break;
  }
  return out;
}

json tool_schema(const ToolSpec& tool) {
  json properties = json::object();
  json required = json::array();
  for (const auto& [name, spec] : tool.parameters) {
    properties[name] = json_schema_type(spec);
    if (spec.required) required.push_back(name);
  }
  json fn;
  fn["name"] = tool.name;
  fn["description"] = tool.description;
  fn["parameters"] = {{"type", "object"}, {"properties", properties}, {"required", required}};
  return {{"type", "function"}, {"function", fn}};
}

json message_to_json(const ChatMessage& message) {
  json m;
  m["role"] = message.role;
  m["content"] = message.content;
  if (!message.tool_calls.empty()) {
    json calls = json::array();
    for (const auto& call : message.tool_calls) {
      calls.push_back({{"id", call.id},
                       {"type", "function"},
                       {"function", {{"name", call.name}, {"arguments", call.arguments}}}});
    }
    m["tool_calls"] = calls;
  }
  if (!message.tool_call_id.empty()) m["tool_call_id"] = message.tool_call_id;
  return m;
}

AssistantTurn parse_response(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("unparseable completion response: ") + e.what());
  }
  if (!doc.contains("choices") || doc["choices"].empty())
    throw TransportError("completion response has no choices");
  const json& message = doc["choices"][0].at("message");

  AssistantTurn turn;
  turn.message.role = message.value("role", "assistant");
  if (message.contains("content") && message["content"].is_string())
    turn.message.content = message["content"].get<std::string>();
  if (message.contains("tool_calls")) {
    for (const auto& call : message["tool_calls"]) {
      ToolCallRequest request;
      request.id = call.value("id", "");
      if (call.contains("function")) {
        const json& fn = call["function"];
        request.name = fn.value("name", "");
        if (fn.contains("arguments")) {
          request.arguments = fn["arguments"].is_string() ? fn["arguments"].get<std::string>()
                                                          : fn["arguments"].dump();
        }
      }
      turn.message.tool_calls.push_back(std::move(request));
    }
  }

  if (doc.contains("usage") && doc["usage"].is_object()) {
    const json& usage = doc["usage"];
    if (usage.contains("prompt_tokens") && usage.contains("completion_tokens")) {
      turn.usage.tokens_in = usage["prompt_tokens"].get<long long>();
      turn.usage.tokens_out = usage["completion_tokens"].get<long long>();
      turn.usage.reported = true;
    }
  }
  if (!turn.usage.reported) {
    // Fall back to the local estimator; callers can tell via usage.reported.
    std::string serialized = turn.message.content;
    for (const auto& call : turn.message.tool_calls)
      serialized += " " + call.name + " " + call.arguments;
    turn.usage.tokens_out = estimate_tokens(serialized);
    turn.usage.tokens_in = 0;
  }
  return turn;
}

}  // namespace

AssistantTurn complete_turn(const RemoteConfig& config,
                            const std::vector<ChatMessage>& conversation,
                            const std::vector<ToolSpec>& tools) {
  const auto [base, path] = split_endpoint(config.endpoint);

  json body;
  body["model"] = config.model;
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_response_tokens;
  json messages = json::array();
  for (const auto& message : conversation) messages.push_back(message_to_json(message));
  body["messages"] = messages;
  if (!tools.empty()) {
    json schemas = json::array();
    for (const auto& tool : tools) schemas.push_back(tool_schema(tool));
    body["tools"] = schemas;
  }
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!config.credential_env.empty()) {
    if (const char* secret = std::getenv(config.credential_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + secret);
  }

  std::string last_error;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto delay = config.retry_initial_delay_ms * (1 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    httplib::Client client(base);
    client.set_read_timeout(60, 0);
    auto response = client.Post(path, headers, payload, "application/json");
    if (!response) {
      last_error = "connection failed (" + httplib::to_string(response.error()) + ")";
      continue;
    }
    if (response->status == 401 || response->status == 403)
      throw TransportError("authentication failure (HTTP " + std::to_string(response->status) +
                           ") from " + config.endpoint);
    if (response->status >= 500) {
      last_error = "HTTP " + std::to_string(response->status);
      continue;
    }
    if (response->status != 200)
      throw TransportError("HTTP " + std::to_string(response->status) + " from " +
                           config.endpoint + ": " + response->body);
    return parse_response(response->body);
  }
  throw TransportError("transport failure after " + std::to_string(config.max_retries) +
                       " retries against " + config.endpoint + ": " + last_error);
}

}  // namespace feasikit::agents
