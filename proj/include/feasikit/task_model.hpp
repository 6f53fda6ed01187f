#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "feasikit/common.hpp"

namespace feasikit::task_model {

enum class ParamType { string_type, number, boolean, enumeration, object, array };

std::string to_string(ParamType type);
ParamType param_type_from_string(const std::string& text);

struct ParamSpec {
  ParamType type = ParamType::string_type;
  bool required = false;
  std::vector<std::string> enum_values;  // enumeration only

  bool operator==(const ParamSpec&) const = default;
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::map<std::string, ParamSpec> parameters;

  bool operator==(const ToolSpec&) const = default;
};

struct Task {
  std::string task_id;
  std::string dataset_id;
  std::string query;
  std::vector<ToolSpec> tool_pool;
  std::map<std::string, std::string> ground_truth;  // opaque; read by success oracles
  std::map<std::string, std::string> metadata;

  bool operator==(const Task&) const = default;
};

struct ValidationFinding {
  std::string task_id;
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationFinding> findings;
  bool ok() const { return findings.empty(); }
};

ValidationReport validate_task(const Task& task);

// Formats: "canonical" plus the per-source adapters
// {"bfcl", "stabletoolbench", "apibank", "taubench"}. Adapter output is
// normalized into the canonical schema; input order is preserved.
std::vector<Task> load_dataset(const std::filesystem::path& path,
                               const std::string& format = "canonical");

void save_dataset(const std::filesystem::path& path, const std::string& dataset_id,
                  const std::vector<Task>& tasks);

std::string dataset_to_string(const std::string& dataset_id, const std::vector<Task>& tasks);
std::vector<Task> dataset_from_string(const std::string& text);

struct SyntheticSuiteSpec {
  int task_count = 1;
  int pool_size = 5;        // base tools per task; clones are injected on top
  int critical_count = 1;   // planted critical tools per task
  int redundant_pairs = 0;  // clone pairs on non-critical tools
  int critical_clone_pairs = 0;  // clone pairs on critical tools (hazard injection)
  std::uint64_t seed = 0;
};

struct SyntheticSuite {
  std::vector<Task> tasks;
  std::map<std::string, std::set<std::string>> planted_critical;  // task_id -> tool names
};

// Deterministic for a fixed spec. Each task's ground_truth encodes a solution
// path requiring exactly the planted critical tools.
SyntheticSuite generate_synthetic_suite(const SyntheticSuiteSpec& spec);

void save_planted(const std::filesystem::path& path,
                  const std::map<std::string, std::set<std::string>>& planted);
std::map<std::string, std::set<std::string>> load_planted(const std::filesystem::path& path);

}  // namespace feasikit::task_model
