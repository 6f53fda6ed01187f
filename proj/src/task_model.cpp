#include "feasikit/task_model.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace feasikit::task_model {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << text;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError("parse failure in " + what + ": " + e.what());
  }
}

// Accepts a whole-file JSON value (array or object) or JSON lines.
std::vector<json> parse_documents(const std::string& text, const std::string& what) {
  std::string trimmed = text;
  const auto first = trimmed.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw DataError("parse failure in " + what + ": empty file");
  if (trimmed[first] == '[' || trimmed[first] == '{') {
    // Could still be JSONL of objects; try whole-file parse first.
    try {
      json whole = json::parse(trimmed);
      return {whole};
    } catch (const json::exception&) {
      // fall through to line-by-line
    }
  }
  std::vector<json> docs;
  std::istringstream lines(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    try {
      docs.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError("parse failure in " + what + " line " + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  if (docs.empty()) throw DataError("parse failure in " + what + ": no records");
  return docs;
}

}  // namespace

std::string to_string(ParamType type) {
  switch (type) {
    case ParamType::string_type: return "string";
    case ParamType::number: return "number";
    case ParamType::boolean: return "boolean";
    case ParamType::enumeration: return "enum";
    case ParamType::object: return "object";
    case ParamType::array: return "array";
  }
  return "string";
}

ParamType param_type_from_string(const std::string& text) {
  if (text == "string") return ParamType::string_type;
  if (text == "number") return ParamType::number;
  if (text == "boolean") return ParamType::boolean;
  if (text == "enum") return ParamType::enumeration;
  if (text == "object") return ParamType::object;
  if (text == "array") return ParamType::array;
  throw DataError("unknown parameter type: '" + text + "'");
}

ValidationReport validate_task(const Task& task) {
  ValidationReport report;
  auto add = [&](const std::string& field, const std::string& message) {
    report.findings.push_back({task.task_id, field, message});
  };
  if (task.task_id.empty()) add("task_id", "empty task_id");
  if (task.query.empty()) add("query", "empty query");
  std::set<std::string> seen;
  for (const auto& tool : task.tool_pool) {
    if (tool.name.empty()) add("tool_pool", "empty tool name");
    if (!seen.insert(tool.name).second)
      add("tool_pool", "duplicate tool name '" + tool.name + "'");
    for (const auto& [param, spec] : tool.parameters) {
      if (param.empty()) add("tool_pool", "tool '" + tool.name + "' has an unnamed parameter");
      if (spec.type == ParamType::enumeration && spec.enum_values.empty())
        add("tool_pool",
            "tool '" + tool.name + "' parameter '" + param + "' is an enum with no values");
    }
  }
  return report;
}

namespace {

json param_to_json(const ParamSpec& spec) {
  json j;
  j["type"] = to_string(spec.type);
  j["required"] = spec.required;
  if (spec.type == ParamType::enumeration) j["values"] = spec.enum_values;
  return j;
}

ParamSpec param_from_json(const json& j) {
  ParamSpec spec;
  spec.type = param_type_from_string(j.at("type").get<std::string>());
  spec.required = j.value("required", false);
  if (j.contains("values"))
    spec.enum_values = j["values"].get<std::vector<std::string>>();
  return spec;
}

json tool_to_json(const ToolSpec& tool) {
  json j;
  j["name"] = tool.name;
  j["description"] = tool.description;
  json params = json::object();
  for (const auto& [name, spec] : tool.parameters) params[name] = param_to_json(spec);
  j["parameters"] = params;
  return j;
}

ToolSpec tool_from_json(const json& j) {
  ToolSpec tool;
  tool.name = j.at("name").get<std::string>();
  tool.description = j.value("description", "");
  if (j.contains("parameters")) {
    for (const auto& [name, spec] : j["parameters"].items())
      tool.parameters[name] = param_from_json(spec);
  }
  return tool;
}

json task_to_json(const Task& task) {
  json j;
  j["task_id"] = task.task_id;
  j["query"] = task.query;
  json pool = json::array();
  for (const auto& tool : task.tool_pool) pool.push_back(tool_to_json(tool));
  j["tool_pool"] = pool;
  if (!task.ground_truth.empty()) j["ground_truth"] = task.ground_truth;
  if (!task.metadata.empty()) j["metadata"] = task.metadata;
  return j;
}

Task task_from_json(const json& j, const std::string& dataset_id) {
  Task task;
  task.task_id = j.at("task_id").get<std::string>();
  task.dataset_id = dataset_id;
  task.query = j.at("query").get<std::string>();
  for (const auto& tool : j.at("tool_pool")) task.tool_pool.push_back(tool_from_json(tool));
  if (j.contains("ground_truth"))
    task.ground_truth = j["ground_truth"].get<std::map<std::string, std::string>>();
  if (j.contains("metadata"))
    task.metadata = j["metadata"].get<std::map<std::string, std::string>>();
  return task;
}

void check_loaded(const std::vector<Task>& tasks, const std::string& what) {
  std::set<std::string> ids;
  for (const auto& task : tasks) {
    if (!ids.insert(task.task_id).second)
      throw DataError(what + ": duplicate task_id '" + task.task_id + "'");
    const auto report = validate_task(task);
    if (!report.ok()) {
      const auto& finding = report.findings.front();
      throw DataError(what + ": task '" + finding.task_id + "' field '" + finding.field +
                      "': " + finding.message);
    }
  }
}

std::vector<Task> load_canonical(const std::string& text, const std::string& what) {
  json doc = parse_json(text, what);
  if (!doc.is_object() || !doc.contains("tasks"))
    throw DataError(what + ": not a canonical task file (missing 'tasks')");
  const std::string dataset_id = doc.value("dataset_id", "");
  std::vector<Task> tasks;
  for (const auto& entry : doc["tasks"]) tasks.push_back(task_from_json(entry, dataset_id));
  return tasks;
}

// ---- source-benchmark adapters -------------------------------------------

ParamType schema_type(const std::string& raw) {
  std::string t;
  for (char ch : raw) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (t == "integer" || t == "float" || t == "number" || t == "int" || t == "double")
    return ParamType::number;
  if (t == "boolean" || t == "bool") return ParamType::boolean;
  if (t == "array" || t == "list" || t == "tuple") return ParamType::array;
  if (t == "object" || t == "dict" || t == "map") return ParamType::object;
  if (t == "enum") return ParamType::enumeration;
  return ParamType::string_type;
}

// JSON-schema style {"properties": {...}, "required": [...]} used by BFCL
// function definitions and tau-bench tool definitions.
std::map<std::string, ParamSpec> params_from_schema(const json& schema) {
  std::map<std::string, ParamSpec> params;
  if (!schema.is_object()) return params;
  std::set<std::string> required;
  if (schema.contains("required"))
    for (const auto& name : schema["required"]) required.insert(name.get<std::string>());
  if (!schema.contains("properties")) return params;
  for (const auto& [name, prop] : schema["properties"].items()) {
    ParamSpec spec;
    if (prop.contains("enum")) {
      spec.type = ParamType::enumeration;
      for (const auto& v : prop["enum"])
        spec.enum_values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    } else {
      spec.type = schema_type(prop.value("type", "string"));
    }
    spec.required = required.count(name) > 0;
    params[name] = spec;
  }
  return params;
}

std::string bfcl_query(const json& question) {
  if (question.is_string()) return question.get<std::string>();
  // Nested turn lists: [[{"role": "user", "content": "..."}], ...]
  std::string query;
  auto append_content = [&](const json& msg) {
    if (msg.is_object() && msg.contains("content") && msg["content"].is_string()) {
      if (!query.empty()) query += "\n";
      query += msg["content"].get<std::string>();
    }
  };
  if (question.is_array()) {
    for (const auto& turn : question) {
      if (turn.is_array())
        for (const auto& msg : turn) append_content(msg);
      else
        append_content(turn);
    }
  }
  return query;
}

std::vector<Task> load_bfcl(const std::string& text, const std::string& what) {
  std::vector<Task> tasks;
  for (const auto& doc : parse_documents(text, what)) {
    std::vector<json> entries;
    if (doc.is_array())
      entries.assign(doc.begin(), doc.end());
    else
      entries.push_back(doc);
    for (const auto& entry : entries) {
      Task task;
      task.dataset_id = "BFCL";
      task.task_id = entry.contains("id") ? entry["id"].get<std::string>()
                                          : "bfcl-" + std::to_string(tasks.size());
      task.query = bfcl_query(entry.value("question", json()));
      json functions = entry.value("function", json::array());
      if (functions.is_object()) functions = json::array({functions});
      for (const auto& fn : functions) {
        ToolSpec tool;
        tool.name = fn.at("name").get<std::string>();
        tool.description = fn.value("description", "");
        tool.parameters = params_from_schema(fn.value("parameters", json::object()));
        task.tool_pool.push_back(tool);
      }
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

std::vector<Task> load_stabletoolbench(const std::string& text, const std::string& what) {
  std::vector<Task> tasks;
  std::vector<json> entries;
  for (auto& doc : parse_documents(text, what)) {
    if (doc.is_object() && doc.contains("data"))
      for (const auto& e : doc["data"]) entries.push_back(e);
    else if (doc.is_array())
      entries.insert(entries.end(), doc.begin(), doc.end());
    else
      entries.push_back(doc);
  }
  auto param_list = [](const json& list, bool required, std::map<std::string, ParamSpec>& out) {
    if (!list.is_array()) return;
    for (const auto& p : list) {
      ParamSpec spec;
      spec.type = schema_type(p.value("type", "STRING"));
      spec.required = required;
      out[p.at("name").get<std::string>()] = spec;
    }
  };
  for (const auto& entry : entries) {
    Task task;
    task.dataset_id = "StableToolBench";
    if (entry.contains("query_id"))
      task.task_id = "stb-" + (entry["query_id"].is_string()
                                   ? entry["query_id"].get<std::string>()
                                   : std::to_string(entry["query_id"].get<long long>()));
    else
      task.task_id = "stb-" + std::to_string(tasks.size());
    task.query = entry.value("query", "");
    for (const auto& api : entry.value("api_list", json::array())) {
      ToolSpec tool;
      const std::string api_name = api.value("api_name", "");
      const std::string tool_name = api.value("tool_name", "");
      tool.name = tool_name.empty() ? api_name : tool_name + "." + api_name;
      tool.description = api.value("api_description", "");
      param_list(api.value("required_parameters", json::array()), true, tool.parameters);
      param_list(api.value("optional_parameters", json::array()), false, tool.parameters);
      task.tool_pool.push_back(tool);
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<Task> load_apibank(const std::string& text, const std::string& what) {
  std::vector<Task> tasks;
  std::vector<json> entries;
  for (auto& doc : parse_documents(text, what)) {
    if (doc.is_array())
      entries.insert(entries.end(), doc.begin(), doc.end());
    else
      entries.push_back(doc);
  }
  for (const auto& entry : entries) {
    Task task;
    task.dataset_id = "API-Bank";
    if (entry.contains("sample_id"))
      task.task_id = "apibank-" + (entry["sample_id"].is_string()
                                       ? entry["sample_id"].get<std::string>()
                                       : std::to_string(entry["sample_id"].get<long long>()));
    else
      task.task_id = "apibank-" + std::to_string(tasks.size());
    task.query = entry.contains("query") ? entry["query"].get<std::string>()
                                         : entry.value("instruction", "");
    for (const auto& api : entry.value("apis", json::array())) {
      ToolSpec tool;
      tool.name = api.contains("name") ? api["name"].get<std::string>()
                                       : api.value("api_name", "");
      tool.description = api.value("description", "");
      if (api.contains("input_parameters") && api["input_parameters"].is_object()) {
        for (const auto& [pname, pspec] : api["input_parameters"].items()) {
          ParamSpec spec;
          spec.type = schema_type(pspec.value("type", "str"));
          spec.required = pspec.value("required", true);
          tool.parameters[pname] = spec;
        }
      }
      task.tool_pool.push_back(tool);
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<Task> load_taubench(const std::string& text, const std::string& what) {
  std::vector<Task> tasks;
  std::vector<json> entries;
  for (auto& doc : parse_documents(text, what)) {
    if (doc.is_object() && doc.contains("tasks"))
      for (const auto& e : doc["tasks"]) entries.push_back(e);
    else if (doc.is_array())
      entries.insert(entries.end(), doc.begin(), doc.end());
    else
      entries.push_back(doc);
  }
  for (const auto& entry : entries) {
    Task task;
    task.dataset_id = "tau-bench";
    if (entry.contains("task_id"))
      task.task_id = entry["task_id"].is_string() ? entry["task_id"].get<std::string>()
                                                  : "tau-" + entry["task_id"].dump();
    else if (entry.contains("id"))
      task.task_id = entry["id"].is_string() ? entry["id"].get<std::string>()
                                             : "tau-" + entry["id"].dump();
    else
      task.task_id = "tau-" + std::to_string(tasks.size());
    task.query = entry.contains("instruction") ? entry["instruction"].get<std::string>()
                                               : entry.value("query", "");
    for (const auto& t : entry.value("tools", json::array())) {
      ToolSpec tool;
      tool.name = t.at("name").get<std::string>();
      tool.description = t.value("description", "");
      tool.parameters = params_from_schema(t.value("parameters", json::object()));
      task.tool_pool.push_back(tool);
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace

std::vector<Task> load_dataset(const std::filesystem::path& path, const std::string& format) {
  const std::string text = read_file(path);
  const std::string what = path.filename().string();
  std::vector<Task> tasks;
  if (format == "canonical")
    tasks = load_canonical(text, what);
  else if (format == "bfcl")
    tasks = load_bfcl(text, what);
  else if (format == "stabletoolbench")
    tasks = load_stabletoolbench(text, what);
  else if (format == "apibank")
    tasks = load_apibank(text, what);
  else if (format == "taubench")
    tasks = load_taubench(text, what);
  else
    throw ConfigError("unknown dataset format: '" + format + "'");
  check_loaded(tasks, what);
  return tasks;
}

std::string dataset_to_string(const std::string& dataset_id, const std::vector<Task>& tasks) {
  json doc;
  doc["schema_version"] = 1;
  doc["dataset_id"] = dataset_id;
  json list = json::array();
  for (const auto& task : tasks) list.push_back(task_to_json(task));
  doc["tasks"] = list;
  return doc.dump(2) + "\n";
}

std::vector<Task> dataset_from_string(const std::string& text) {
  auto tasks = load_canonical(text, "<string>");
  check_loaded(tasks, "<string>");
  return tasks;
}

void save_dataset(const std::filesystem::path& path, const std::string& dataset_id,
                  const std::vector<Task>& tasks) {
  write_file(path, dataset_to_string(dataset_id, tasks));
}

namespace {

const std::vector<std::string> kVerbs = {
    "fetch",  "convert",  "create",    "cancel",  "rank",    "merge",
    "verify", "schedule", "encode",    "route",   "filter",  "archive",
    "translate", "summarize", "audit", "predict"};
const std::vector<std::string> kNouns = {
    "invoice", "itinerary", "ticket",  "profile",  "forecast", "payment",
    "calendar", "dataset",  "message", "order",    "sensor",   "album",
    "shipment", "quote",    "playlist", "ledger"};
const std::vector<std::string> kParamNames = {"target", "limit", "mode",  "query", "amount",
                                              "date",   "flag",  "items", "options"};
const std::vector<std::string> kEnumValues = {"alpha", "beta", "gamma", "delta"};

// Plain modulo keeps generation byte-identical across standard libraries.
size_t bounded(std::mt19937_64& rng, size_t n) { return static_cast<size_t>(rng() % n); }

ToolSpec make_tool(std::mt19937_64& rng, int capability, std::set<std::string>& used_names) {
  ToolSpec tool;
  std::string base =
      kVerbs[bounded(rng, kVerbs.size())] + "_" + kNouns[bounded(rng, kNouns.size())];
  std::string name = base;
  int suffix = 2;
  while (!used_names.insert(name).second) name = base + "_" + std::to_string(suffix++);
  tool.name = name;
  tool.description = "Capability c" + std::to_string(capability) + ": " +
                     name.substr(0, name.find('_')) + " the requested record.";
  const size_t param_count = 1 + bounded(rng, 3);
  std::vector<size_t> picks;
  while (picks.size() < param_count) {
    const size_t pick = bounded(rng, kParamNames.size());
    if (std::find(picks.begin(), picks.end(), pick) == picks.end()) picks.push_back(pick);
  }
  for (const size_t pick : picks) {
    ParamSpec spec;
    switch (bounded(rng, 6)) {
      case 0: spec.type = ParamType::string_type; break;
      case 1: spec.type = ParamType::number; break;
      case 2: spec.type = ParamType::boolean; break;
      case 3: spec.type = ParamType::enumeration; break;
      case 4: spec.type = ParamType::object; break;
      default: spec.type = ParamType::array; break;
    }
    if (spec.type == ParamType::enumeration) {
      const size_t count = 2 + bounded(rng, 3);
      spec.enum_values.assign(kEnumValues.begin(), kEnumValues.begin() + count);
    }
    spec.required = bounded(rng, 2) == 0;
    tool.parameters[kParamNames[pick]] = spec;
  }
  return tool;
}

std::string format_task_id(int index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "syn-%04d", index);
  return buffer;
}

}  // namespace

SyntheticSuite generate_synthetic_suite(const SyntheticSuiteSpec& spec) {
  if (spec.task_count < 1) throw DataError("generate_synthetic_suite: task_count must be >= 1");
  if (spec.critical_count < 1 || spec.critical_count >= spec.pool_size)
    throw DataError("generate_synthetic_suite: critical_count must satisfy 0 < k < pool_size");
  if (spec.redundant_pairs < 0 || spec.critical_clone_pairs < 0)
    throw DataError("generate_synthetic_suite: clone pair counts must be >= 0");
  if (spec.redundant_pairs > spec.pool_size - spec.critical_count)
    throw DataError("generate_synthetic_suite: not enough non-critical tools for redundant_pairs");
  if (spec.critical_clone_pairs > spec.critical_count)
    throw DataError("generate_synthetic_suite: not enough critical tools for critical_clone_pairs");

  std::mt19937_64 rng(spec.seed);
  SyntheticSuite suite;
  for (int i = 0; i < spec.task_count; ++i) {
    Task task;
    task.task_id = format_task_id(i + 1);
    task.dataset_id = "synthetic";

    std::set<std::string> used_names;
    std::vector<ToolSpec> base_tools;
    for (int k = 0; k < spec.pool_size; ++k)
      base_tools.push_back(make_tool(rng, k, used_names));

    // Pick planted criticals among the base tools.
    std::vector<int> order(base_tools.size());
    for (size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    for (size_t k = order.size(); k > 1; --k)
      std::swap(order[k - 1], order[bounded(rng, k)]);
    std::set<int> critical_idx(order.begin(), order.begin() + spec.critical_count);

    std::set<std::string> planted;
    for (int idx : critical_idx) planted.insert(base_tools[idx].name);

    task.tool_pool = base_tools;
    auto add_clone = [&](const ToolSpec& original) {
      ToolSpec clone = original;
      std::string name = original.name + "_v2";
      int suffix = 3;
      while (!used_names.insert(name).second)
        name = original.name + "_v" + std::to_string(suffix++);
      clone.name = name;
      task.tool_pool.push_back(clone);
    };
    int injected = 0;
    for (size_t k = spec.critical_count; k < order.size() && injected < spec.redundant_pairs; ++k) {
      add_clone(base_tools[order[k]]);
      ++injected;
    }
    injected = 0;
    for (int idx : critical_idx) {
      if (injected >= spec.critical_clone_pairs) break;
      add_clone(base_tools[idx]);
      ++injected;
    }

    const std::string first_critical = *planted.begin();
    task.query = "Request " + std::to_string(i + 1) + ": complete the " + first_critical +
                 " workflow for this customer and report the final result.";

    std::string required;
    for (const auto& name : planted) {
      if (!required.empty()) required += " ";
      required += name;
    }
    char answer[64];
    std::snprintf(answer, sizeof(answer), "result-%s-%016llx", task.task_id.c_str(),
                  static_cast<unsigned long long>(rng()));
    task.ground_truth = {{"kind", "tool_sequence"},
                         {"required_tools", required},
                         {"answer", answer}};
    task.metadata = {{"generator", "synthetic"}};

    const auto report = validate_task(task);
    if (!report.ok())
      throw DataError("generate_synthetic_suite: generated invalid task " + task.task_id);
    suite.planted_critical[task.task_id] = planted;
    suite.tasks.push_back(std::move(task));
  }
  return suite;
}

void save_planted(const std::filesystem::path& path,
                  const std::map<std::string, std::set<std::string>>& planted) {
  json doc;
  doc["schema_version"] = 1;
  json map = json::object();
  for (const auto& [task_id, tools] : planted)
    map[task_id] = std::vector<std::string>(tools.begin(), tools.end());
  doc["planted_critical"] = map;
  write_file(path, doc.dump(2) + "\n");
}

std::map<std::string, std::set<std::string>> load_planted(const std::filesystem::path& path) {
  json doc = parse_json(read_file(path), path.filename().string());
  std::map<std::string, std::set<std::string>> planted;
  for (const auto& [task_id, tools] : doc.at("planted_critical").items()) {
    std::set<std::string> names;
    for (const auto& t : tools) names.insert(t.get<std::string>());
    planted[task_id] = names;
  }
  return planted;
}

}  // namespace feasikit::task_model
