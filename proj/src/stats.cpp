#include "feasikit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "feasikit/common.hpp"

namespace feasikit::stats {

namespace {

double polynomial(const double* coeffs, int count, double x) {
  double acc = coeffs[count - 1];
  for (int i = count - 2; i >= 0; --i) acc = acc * x + coeffs[i];
  return acc;
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DataError("normal_quantile: p must lie in (0,1)");

  // AS241 (PPND16) coefficients.
  static const double a[] = {3.3871328727963666080e0, 1.3314166789178437745e2,
                             1.9715909503065514427e3, 1.3731693765509461125e4,
                             4.5921953931549871457e4, 6.7265770927008700853e4,
                             3.3430575583588128105e4, 2.5090809287301226727e3};
  static const double b[] = {1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
                             5.3941960214247511077e3, 2.1213794301586595867e4,
                             3.9307895800092710610e4, 2.8729085735721942674e4,
                             5.2264952788528545610e3};
  static const double c[] = {1.42343711074968357734e0, 4.63033784615654529590e0,
                             5.76949722146069140550e0, 3.64784832476320460504e0,
                             1.27045825245236838258e0, 2.41780725177450611770e-1,
                             2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const double d[] = {1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
                             6.89767334985100004550e-1, 1.48103976427480074590e-1,
                             1.51986665636164571966e-2, 5.47593808499534494600e-4,
                             1.05075007164441684324e-9};
  static const double e[] = {6.65790464350110377720e0, 5.46378491116411436990e0,
                             1.78482653991729133580e0, 2.96560571828504891230e-1,
                             2.65321895265761230930e-2, 1.24266094738807843860e-3,
                             2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const double f[] = {1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
                             1.48753612908506148525e-2, 7.86869131145613259100e-4,
                             1.84631831751005468180e-5, 1.42151175831644588870e-7,
                             2.04426310338993978564e-15};

  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * polynomial(a, 8, r) / polynomial(b, 8, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double z;
  if (r <= 5.0) {
    r -= 1.6;
    z = polynomial(c, 8, r) / polynomial(d, 8, r);
  } else {
    r -= 5.0;
    z = polynomial(e, 8, r) / polynomial(f, 8, r);
  }
  return q < 0.0 ? -z : z;
}

SamplePlan cochran_sample_size(long long population, double confidence, double margin,
                               double variability, SizeRounding rounding) {
  if (population < 1) throw DataError("cochran_sample_size: population must be >= 1");
  if (!(margin > 0.0 && margin < 1.0)) throw DataError("cochran_sample_size: margin must be in (0,1)");
  if (!(variability > 0.0 && variability < 1.0))
    throw DataError("cochran_sample_size: variability must be in (0,1)");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw DataError("cochran_sample_size: confidence must be in (0,1)");

  SamplePlan plan;
  plan.population = population;
  plan.confidence = confidence;
  plan.margin = margin;
  plan.variability = variability;

  const double z = normal_quantile(0.5 + confidence / 2.0);
  plan.n0 = z * z * variability * (1.0 - variability) / (margin * margin);

  const double corrected =
      plan.n0 / (1.0 + (plan.n0 - 1.0) / static_cast<double>(population));
  double rounded = rounding == SizeRounding::ceil_after_fpc ? std::ceil(corrected)
                                                            : std::floor(corrected + 0.5);
  plan.n = std::min<long long>(static_cast<long long>(rounded), population);
  plan.n = std::max<long long>(plan.n, 1);
  return plan;
}

std::map<std::string, long long> proportional_allocation(
    long long n, const std::map<std::string, long long>& strata, Apportionment method) {
  long long total = 0;
  for (const auto& [name, size] : strata) {
    if (size < 0) throw DataError("proportional_allocation: negative stratum size for " + name);
    total += size;
  }
  if (n < 0 || n > total)
    throw DataError("proportional_allocation: n exceeds the population");

  struct Entry {
    std::string name;
    long long size;
    double quota;
    long long count;
  };
  std::vector<Entry> entries;
  long long assigned = 0;
  for (const auto& [name, size] : strata) {
    const double quota =
        total == 0 ? 0.0 : static_cast<double>(n) * static_cast<double>(size) / static_cast<double>(total);
    long long base = method == Apportionment::largest_remainder
                         ? static_cast<long long>(std::floor(quota))
                         : static_cast<long long>(std::floor(quota + 0.5));
    base = std::min(base, size);
    entries.push_back({name, size, quota, base});
    assigned += base;
  }

  // Repair the sum: hand out leftovers by largest remainder (or trim by
  // smallest), never pushing a stratum past its size.
  auto remainder = [](const Entry& e) { return e.quota - static_cast<double>(e.count); };
  while (assigned < n) {
    Entry* best = nullptr;
    for (auto& e : entries) {
      if (e.count >= e.size) continue;
      if (best == nullptr || remainder(e) > remainder(*best)) best = &e;
    }
    if (best == nullptr) throw DataError("proportional_allocation: infeasible allocation");
    ++best->count;
    ++assigned;
  }
  while (assigned > n) {
    Entry* best = nullptr;
    for (auto& e : entries) {
      if (e.count <= 0) continue;
      if (best == nullptr || remainder(e) < remainder(*best)) best = &e;
    }
    if (best == nullptr) break;
    --best->count;
    --assigned;
  }

  std::map<std::string, long long> out;
  for (const auto& e : entries) out[e.name] = e.count;
  return out;
}

ConfidenceInterval wilson_interval(long long successes, long long trials, double confidence) {
  if (trials < 1) throw DataError("wilson_interval: trials must be >= 1");
  if (successes < 0 || successes > trials)
    throw DataError("wilson_interval: successes out of range");

  const double z = normal_quantile(0.5 + confidence / 2.0);
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;

  ConfidenceInterval ci;
  ci.point = phat;
  ci.low = std::max(0.0, center - half);
  ci.high = std::min(1.0, center + half);
  return ci;
}

double raw_agreement(const AgreementTable& table) {
  const long long n = table.total();
  if (n < 1) throw DataError("raw_agreement: empty table");
  return static_cast<double>(table.both_positive + table.both_negative) / static_cast<double>(n);
}

std::optional<double> cohen_kappa(const AgreementTable& table) {
  const long long n = table.total();
  if (n < 1) throw DataError("cohen_kappa: empty table");
  const double total = static_cast<double>(n);
  const double po = raw_agreement(table);
  const double p1_pos = static_cast<double>(table.both_positive + table.first_only) / total;
  const double p2_pos = static_cast<double>(table.both_positive + table.second_only) / total;
  const double pe = p1_pos * p2_pos + (1.0 - p1_pos) * (1.0 - p2_pos);
  if (std::fabs(1.0 - pe) < 1e-15) return std::nullopt;
  return (po - pe) / (1.0 - pe);
}

std::optional<double> gwet_ac1(const AgreementTable& table) {
  const long long n = table.total();
  if (n < 1) throw DataError("gwet_ac1: empty table");
  const double total = static_cast<double>(n);
  const double po = raw_agreement(table);
  const double p1_pos = static_cast<double>(table.both_positive + table.first_only) / total;
  const double p2_pos = static_cast<double>(table.both_positive + table.second_only) / total;
  const double pi = (p1_pos + p2_pos) / 2.0;
  const double pe = 2.0 * pi * (1.0 - pi);  // bounded by 0.5
  if (std::fabs(1.0 - pe) < 1e-15) return std::nullopt;
  return (po - pe) / (1.0 - pe);
}

}  // namespace feasikit::stats
