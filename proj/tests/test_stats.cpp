#include "feasikit/stats.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "feasikit/common.hpp"

using namespace feasikit;
using namespace feasikit::stats;

TEST_CASE("normal quantile matches reference values") {
  CHECK(std::fabs(normal_quantile(0.975) - 1.959963984540054) < 1e-9);
  CHECK(std::fabs(normal_quantile(0.995) - 2.5758293035489004) < 1e-9);
  CHECK(std::fabs(normal_quantile(0.5)) < 1e-12);
  CHECK(std::fabs(normal_quantile(0.025) + normal_quantile(0.975)) < 1e-12);
  CHECK_THROWS_AS(normal_quantile(0.0), DataError);
  CHECK_THROWS_AS(normal_quantile(1.0), DataError);
}

TEST_CASE("cochran sample size with finite population correction") {
  const auto plan = cochran_sample_size(1036, 0.95, 0.05, 0.5);
  CHECK(std::fabs(plan.n0 - 384.1458820694124) < 1e-9);
  CHECK(plan.n == 281);

  CHECK(cochran_sample_size(1000000000LL, 0.95, 0.05, 0.5).n == 385);
  CHECK(cochran_sample_size(100, 0.95, 0.05, 0.5).n == 80);

  SUBCASE("n is capped at the population") {
    const auto tiny = cochran_sample_size(5, 0.95, 0.05, 0.5);
    CHECK(tiny.n == 5);
  }

  SUBCASE("half-up rounding override") {
    // 280.43 rounds down under half-up.
    CHECK(cochran_sample_size(1036, 0.95, 0.05, 0.5, SizeRounding::half_up_after_fpc).n == 280);
  }

  SUBCASE("monotone in margin, confidence, and variability") {
    long long previous = 1000000;
    for (double margin : {0.01, 0.02, 0.05, 0.1}) {
      const auto p = cochran_sample_size(10000, 0.95, margin, 0.5);
      CHECK(p.n <= previous);
      previous = p.n;
    }
    previous = 0;
    for (double confidence : {0.8, 0.9, 0.95, 0.99}) {
      const auto p = cochran_sample_size(10000, confidence, 0.05, 0.5);
      CHECK(p.n >= previous);
      previous = p.n;
    }
    const long long at_half = cochran_sample_size(10000, 0.95, 0.05, 0.5).n;
    for (double variability : {0.1, 0.3, 0.7, 0.9})
      CHECK(cochran_sample_size(10000, 0.95, 0.05, variability).n <= at_half);
  }
}

TEST_CASE("proportional allocation by largest remainder") {
  SUBCASE("symmetric strata") {
    const auto counts = proportional_allocation(10, {{"A", 50}, {"B", 50}});
    CHECK(counts.at("A") == 5);
    CHECK(counts.at("B") == 5);
  }

  SUBCASE("verification-sample strata") {
    const std::map<std::string, long long> strata = {
        {"BFCL", 445}, {"StableToolBench", 300}, {"API-Bank", 184}, {"tau-bench", 107}};
    const auto counts = proportional_allocation(283, strata);
    CHECK(counts.at("BFCL") == 122);
    CHECK(counts.at("StableToolBench") == 82);
    CHECK(counts.at("API-Bank") == 50);
    CHECK(counts.at("tau-bench") == 29);
    long long total = 0;
    for (const auto& [name, count] : counts) total += count;
    CHECK(total == 283);
  }

  SUBCASE("n greater than the population is rejected") {
    CHECK_THROWS_AS(proportional_allocation(11, {{"A", 5}, {"B", 5}}), DataError);
  }

  SUBCASE("sum, bounds, and quota proximity over random cases") {
    std::mt19937_64 rng(20260809);
    for (int round = 0; round < 1000; ++round) {
      std::map<std::string, long long> strata;
      const int count = 2 + static_cast<int>(rng() % 5);
      long long population = 0;
      for (int i = 0; i < count; ++i) {
        const long long size = static_cast<long long>(rng() % 500);
        strata["s" + std::to_string(i)] = size;
        population += size;
      }
      if (population == 0) continue;
      const long long n = static_cast<long long>(rng() % (population + 1));
      const auto counts = proportional_allocation(n, strata);
      long long total = 0;
      bool capped = false;
      for (const auto& [name, allocated] : counts) {
        total += allocated;
        CHECK(allocated <= strata.at(name));
        if (allocated == strata.at(name)) capped = true;
      }
      CHECK(total == n);
      if (!capped) {
        for (const auto& [name, allocated] : counts) {
          const double quota = static_cast<double>(n) * static_cast<double>(strata.at(name)) /
                               static_cast<double>(population);
          CHECK(std::fabs(static_cast<double>(allocated) - quota) <= 1.0 + 1e-9);
        }
      }
    }
  }
}

namespace {

void check_wilson_row(long long successes, long long trials, double low3, double high3) {
  const auto ci = wilson_interval(successes, trials, 0.95);
  CHECK(round_half_up(ci.low, 3) == doctest::Approx(low3));
  CHECK(round_half_up(ci.high, 3) == doctest::Approx(high3));
}

}  // namespace

TEST_CASE("wilson intervals reproduce the verification table") {
  check_wilson_row(115, 121, 0.896, 0.977);
  check_wilson_row(77, 82, 0.865, 0.974);
  check_wilson_row(48, 50, 0.865, 0.989);
  check_wilson_row(28, 30, 0.787, 0.982);
  check_wilson_row(268, 283, 0.914, 0.968);
}

TEST_CASE("wilson interval properties") {
  SUBCASE("zero successes") {
    const auto ci = wilson_interval(0, 10, 0.95);
    CHECK(ci.low == 0.0);
    CHECK(ci.high > 0.0);
    CHECK(ci.high < 1.0);
  }
  SUBCASE("point inside interval, endpoints within [0,1]") {
    std::mt19937_64 rng(99);
    for (int round = 0; round < 500; ++round) {
      const long long n = 1 + static_cast<long long>(rng() % 400);
      const long long k = static_cast<long long>(rng() % (n + 1));
      const auto ci = wilson_interval(k, n, 0.95);
      CHECK(ci.low >= 0.0);
      CHECK(ci.high <= 1.0);
      CHECK(ci.low <= ci.point + 1e-12);
      CHECK(ci.point <= ci.high + 1e-12);
    }
  }
  SUBCASE("width shrinks as n grows at a fixed proportion") {
    double previous = 1.0;
    for (long long n : {10LL, 100LL, 1000LL, 10000LL}) {
      const auto ci = wilson_interval(3 * n / 10, n, 0.95);
      const double width = ci.high - ci.low;
      CHECK(width < previous);
      previous = width;
    }
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(wilson_interval(5, 0, 0.95), DataError);
    CHECK_THROWS_AS(wilson_interval(6, 5, 0.95), DataError);
    CHECK_THROWS_AS(wilson_interval(-1, 5, 0.95), DataError);
  }
}

TEST_CASE("raw agreement") {
  CHECK(raw_agreement({10, 0, 0, 10}) == doctest::Approx(1.0));
  CHECK(raw_agreement({90, 2, 3, 5}) == doctest::Approx(0.95));
  CHECK_THROWS_AS(raw_agreement({0, 0, 0, 0}), DataError);
}

TEST_CASE("cohen kappa") {
  SUBCASE("perfect agreement with mixed marginals") {
    CHECK(*cohen_kappa({6, 0, 0, 4}) == doctest::Approx(1.0));
  }
  SUBCASE("worked value") {
    // po = 0.95, pe = 0.92*0.93 + 0.08*0.07 = 0.8612
    CHECK(*cohen_kappa({90, 2, 3, 5}) == doctest::Approx(0.6398).epsilon(1e-3));
  }
  SUBCASE("chance-level agreement") {
    CHECK(*cohen_kappa({25, 25, 25, 25}) == doctest::Approx(0.0));
  }
  SUBCASE("degenerate marginals") {
    CHECK_FALSE(cohen_kappa({10, 0, 0, 0}).has_value());
  }
}

TEST_CASE("gwet ac1") {
  SUBCASE("perfect agreement") { CHECK(*gwet_ac1({6, 0, 0, 4}) == doctest::Approx(1.0)); }
  SUBCASE("worked value") {
    // pi = 0.925, pe = 2*0.925*0.075 = 0.13875
    CHECK(*gwet_ac1({90, 2, 3, 5}) == doctest::Approx(0.9419).epsilon(1e-3));
  }
  SUBCASE("more robust than kappa under skewed prevalence") {
    for (long long a = 80; a <= 93; ++a) {
      const AgreementTable table{a, 2, 3, 95 - a};
      const auto kappa = cohen_kappa(table);
      const auto ac1 = gwet_ac1(table);
      REQUIRE(kappa.has_value());
      REQUIRE(ac1.has_value());
      CHECK(*ac1 >= *kappa - 1e-12);
    }
  }
}

TEST_CASE("kappa never exceeds raw agreement and matches ac1 at perfect agreement") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 500; ++round) {
    const AgreementTable table{static_cast<long long>(rng() % 50),
                               static_cast<long long>(rng() % 10),
                               static_cast<long long>(rng() % 10),
                               static_cast<long long>(rng() % 50)};
    if (table.total() == 0) continue;
    const auto kappa = cohen_kappa(table);
    if (kappa) CHECK(*kappa <= raw_agreement(table) + 1e-12);
    if (table.first_only == 0 && table.second_only == 0 && table.both_positive > 0 &&
        table.both_negative > 0) {
      CHECK(*cohen_kappa(table) == doctest::Approx(1.0));
      CHECK(*gwet_ac1(table) == doctest::Approx(1.0));
    }
  }
}
