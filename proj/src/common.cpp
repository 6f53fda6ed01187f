#include "feasikit/common.hpp"

#include <cctype>
#include <cmath>

namespace feasikit {

std::string to_string(Feasibility value) {
  return value == Feasibility::feasible ? "feasible" : "infeasible";
}

Feasibility feasibility_from_string(const std::string& text) {
  if (text == "feasible") return Feasibility::feasible;
  if (text == "infeasible") return Feasibility::infeasible;
  throw DataError("unknown feasibility value: '" + text + "'");
}

long long estimate_tokens(const std::string& text) {
  long long count = 0;
  bool in_chunk = false;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      in_chunk = false;
    } else if (!in_chunk) {
      in_chunk = true;
      ++count;
    }
  }
  return count;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::floor(value * scale + 0.5) / scale;
}

}  // namespace feasikit
