#pragma once

#include <stdexcept>
#include <string>

namespace feasikit {

// Error categories; the CLI maps them to exit codes (config=1, data=2, transport=3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// Ground-truth label and agent decision share the same two-valued domain.
enum class Feasibility { feasible, infeasible };

std::string to_string(Feasibility value);
Feasibility feasibility_from_string(const std::string& text);

// Deterministic token estimate for turns without provider-reported usage:
// the number of whitespace-delimited chunks in the serialized turn.
long long estimate_tokens(const std::string& text);

// Display rounding, half up. Computation elsewhere stays full precision.
double round_half_up(double value, int decimals);

}  // namespace feasikit
