#pragma once

#include <map>
#include <optional>
#include <string>

namespace feasikit::stats {

/// Two-sided standard normal quantile (inverse CDF), Wichura's AS241
/// rational approximation. Accurate to well below 1e-8 over (0, 1).
double normal_quantile(double p);

enum class SizeRounding { ceil_after_fpc, half_up_after_fpc };

struct SamplePlan {
  long long population = 0;
  double confidence = 0.0;
  double margin = 0.0;
  double variability = 0.0;
  double n0 = 0.0;  // infinite-population size, unrounded
  long long n = 0;  // final size after the finite population correction
  std::map<std::string, long long> allocation;
};

// n0 = z^2 p(1-p)/e^2, then n = round(n0 / (1 + (n0-1)/N)) with the chosen
// rounding, capped at N. Allocation is left empty.
SamplePlan cochran_sample_size(long long population, double confidence, double margin,
                               double variability,
                               SizeRounding rounding = SizeRounding::ceil_after_fpc);

enum class Apportionment { largest_remainder, half_up };

// Apportions n across strata proportionally to their sizes. Counts sum to n
// and never exceed a stratum's size.
std::map<std::string, long long> proportional_allocation(
    long long n, const std::map<std::string, long long>& strata,
    Apportionment method = Apportionment::largest_remainder);

struct ConfidenceInterval {
  double point = 0.0;
  double low = 0.0;
  double high = 0.0;
};

ConfidenceInterval wilson_interval(long long successes, long long trials, double confidence);

// 2x2 dual-annotator contingency counts. "Positive" is the critical/confirmed
// judgment; annotator 1 indexes rows.
struct AgreementTable {
  long long both_positive = 0;   // a
  long long first_only = 0;      // b
  long long second_only = 0;     // c
  long long both_negative = 0;   // d

  long long total() const { return both_positive + first_only + second_only + both_negative; }
};

double raw_agreement(const AgreementTable& table);

// (po - pe)/(1 - pe) with pe from the product of marginals; nullopt when the
// marginals are degenerate (pe = 1).
std::optional<double> cohen_kappa(const AgreementTable& table);

// Same form with pe = 2*pi*(1-pi), pi the mean positive-rate marginal.
std::optional<double> gwet_ac1(const AgreementTable& table);

}  // namespace feasikit::stats
