#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nst::stats {

/// Observations of one metric for one architecture.
struct SampleGroup {
  std::string label;
  std::vector<double> values;

  double mean() const;
  /// Sample variance (n - 1 denominator).
  double variance() const;
  /// PreconditionError unless n >= 2 and every value is finite.
  void validate() const;
};

struct AnovaTable {
  int df_between = 0;
  int df_within = 0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  double ss_total = 0.0;
  double ms_between = 0.0;
  double ms_within = 0.0;
  double f = 0.0;
  double p = 1.0;
};

/// One-way ANOVA. Needs at least two valid groups and N > k. When the within-group
/// sum of squares vanishes, F is 0 (p = 1) if the between sum vanishes too and
/// +infinity (p = 0) otherwise.
AnovaTable one_way_anova(std::span<const SampleGroup> groups);

/// Completes an ANOVA table from its sums of squares and degrees of freedom.
AnovaTable anova_from_sums(double ss_between, double ss_within, int df_between, int df_within);

/// SS_between / SS_total; PreconditionError when SS_total is 0.
double eta_squared(const AnovaTable& table);

/// (mean_a - mean_b) / pooled sd; PreconditionError when the pooled sd is 0.
double cohens_d(const SampleGroup& a, const SampleGroup& b);

struct PairwiseTest {
  std::string label_a;
  std::string label_b;
  double mean_diff = 0.0;  // mean_a - mean_b
  double t = 0.0;
  int df = 0;
  double p = 1.0;
  double p_bonferroni = 1.0;
  std::optional<double> cohens_d;  // absent when the pooled sd is 0
  bool significant = false;        // raw p < alpha

  static constexpr double kAlpha = 0.05;
};

/// Student two-sample t with pooled variance, two-sided. Zero pooled variance
/// with equal means gives t = 0, p = 1; with unequal means t = +-infinity, p = 0.
/// p_bonferroni equals p here; pairwise_tests fills it for a family.
PairwiseTest t_test_pair(const SampleGroup& a, const SampleGroup& b);

/// All pairs i < j in input order, with Bonferroni-adjusted p = min(1, p * pairs).
std::vector<PairwiseTest> pairwise_tests(std::span<const SampleGroup> groups);

/// Source,SS,df,MS,F,p with Between, Within and Total rows.
std::string anova_csv(const AnovaTable& table);
/// One row per comparison; the Bonferroni column is labeled as such.
std::string pairwise_csv(std::span<const PairwiseTest> tests);

nlohmann::json to_json(const AnovaTable& table);
nlohmann::json to_json(const PairwiseTest& test);

}  // namespace nst::stats
