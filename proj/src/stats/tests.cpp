#include "nst/stats/tests.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/core.h>
#include <limits>

#include "nst/errors.hpp"
#include "nst/stats/special.hpp"

namespace nst::stats {

double SampleGroup::mean() const {
  if (values.empty()) throw PreconditionError(fmt::format("group '{}' is empty", label));
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double SampleGroup::variance() const {
  validate();
  const double m = mean();
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return s / static_cast<double>(values.size() - 1);
}

void SampleGroup::validate() const {
  if (values.size() < 2) {
    throw PreconditionError(fmt::format("group '{}' needs at least 2 observations, has {}", label, values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw PreconditionError(fmt::format("group '{}' has a non-finite value", label));
  }
}

AnovaTable anova_from_sums(double ss_between, double ss_within, int df_between, int df_within) {
  if (df_between < 1 || df_within < 1) {
    throw PreconditionError(fmt::format("ANOVA needs positive degrees of freedom ({}, {})", df_between, df_within));
  }
  if (!(ss_between >= 0.0) || !(ss_within >= 0.0)) {
    throw PreconditionError("ANOVA sums of squares must be non-negative");
  }
  AnovaTable t;
  t.df_between = df_between;
  t.df_within = df_within;
  t.ss_between = ss_between;
  t.ss_within = ss_within;
  t.ss_total = ss_between + ss_within;
  t.ms_between = ss_between / df_between;
  t.ms_within = ss_within / df_within;
  if (t.ms_within == 0.0) {
    t.f = t.ms_between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    t.f = t.ms_between / t.ms_within;
  }
  t.p = f_survival(t.f, df_between, df_within);
  return t;
}

AnovaTable one_way_anova(std::span<const SampleGroup> groups) {
  if (groups.size() < 2) throw PreconditionError("ANOVA needs at least two groups");
  std::size_t n_total = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    g.validate();
    n_total += g.values.size();
    for (double v : g.values) grand += v;
  }
  const int k = static_cast<int>(groups.size());
  if (n_total <= groups.size()) throw PreconditionError("ANOVA needs more observations than groups");
  grand /= static_cast<double>(n_total);

  double ss_between = 0.0;
  double ss_within = 0.0;
  for (const auto& g : groups) {
    const double m = g.mean();
    ss_between += static_cast<double>(g.values.size()) * (m - grand) * (m - grand);
    for (double v : g.values) ss_within += (v - m) * (v - m);
  }
  return anova_from_sums(ss_between, ss_within, k - 1, static_cast<int>(n_total) - k);
}

double eta_squared(const AnovaTable& table) {
  if (!(table.ss_total > 0.0)) throw PreconditionError("eta squared is undefined when SS_total is 0");
  return table.ss_between / table.ss_total;
}

namespace {

double pooled_variance(const SampleGroup& a, const SampleGroup& b) {
  const double na = static_cast<double>(a.values.size());
  const double nb = static_cast<double>(b.values.size());
  return ((na - 1.0) * a.variance() + (nb - 1.0) * b.variance()) / (na + nb - 2.0);
}

}  // namespace

double cohens_d(const SampleGroup& a, const SampleGroup& b) {
  const double sp = std::sqrt(pooled_variance(a, b));
  if (sp == 0.0) {
    throw PreconditionError(fmt::format("Cohen's d undefined for '{}' vs '{}': pooled sd is 0", a.label, b.label));
  }
  return (a.mean() - b.mean()) / sp;
}

PairwiseTest t_test_pair(const SampleGroup& a, const SampleGroup& b) {
  PairwiseTest r;
  r.label_a = a.label;
  r.label_b = b.label;
  const double sp2 = pooled_variance(a, b);
  const double na = static_cast<double>(a.values.size());
  const double nb = static_cast<double>(b.values.size());
  r.mean_diff = a.mean() - b.mean();
  r.df = static_cast<int>(a.values.size() + b.values.size()) - 2;
  if (sp2 == 0.0) {
    r.t = r.mean_diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
  } else {
    r.t = r.mean_diff / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
    r.cohens_d = r.mean_diff / std::sqrt(sp2);
  }
  r.p = t_two_sided_p(r.t, r.df);
  r.p_bonferroni = r.p;
  r.significant = r.p < PairwiseTest::kAlpha;
  return r;
}

std::vector<PairwiseTest> pairwise_tests(std::span<const SampleGroup> groups) {
  std::vector<PairwiseTest> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) out.push_back(t_test_pair(groups[i], groups[j]));
  }
  const double m = static_cast<double>(out.size());
  for (auto& t : out) t.p_bonferroni = std::min(1.0, t.p * m);
  return out;
}

std::string anova_csv(const AnovaTable& t) {
  std::string s = "source,ss,df,ms,f,p\n";
  s += fmt::format("between,{},{},{},{},{}\n", t.ss_between, t.df_between, t.ms_between, t.f, t.p);
  s += fmt::format("within,{},{},{},,\n", t.ss_within, t.df_within, t.ms_within);
  s += fmt::format("total,{},{},,,\n", t.ss_total, t.df_between + t.df_within);
  return s;
}

std::string pairwise_csv(std::span<const PairwiseTest> tests) {
  std::string s = "comparison_a,comparison_b,mean_diff,t,df,p,p_bonferroni,cohens_d,significant_raw\n";
  for (const auto& t : tests) {
    s += fmt::format("{},{},{},{},{},{},{},{},{}\n", t.label_a, t.label_b, t.mean_diff, t.t, t.df, t.p,
                     t.p_bonferroni, t.cohens_d ? fmt::format("{}", *t.cohens_d) : std::string(),
                     t.significant ? "yes" : "no");
  }
  return s;
}

namespace {

// JSON has no infinities; they serialize as strings.
nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace

nlohmann::json to_json(const AnovaTable& t) {
  return {{"df_between", t.df_between}, {"df_within", t.df_within}, {"ss_between", t.ss_between},
          {"ss_within", t.ss_within},   {"ss_total", t.ss_total},   {"ms_between", t.ms_between},
          {"ms_within", t.ms_within},   {"f", number(t.f)},         {"p", t.p}};
}

nlohmann::json to_json(const PairwiseTest& t) {
  nlohmann::json j{{"label_a", t.label_a}, {"label_b", t.label_b}, {"mean_diff", t.mean_diff},
                   {"t", number(t.t)},     {"df", t.df},           {"p", t.p},
                   {"p_bonferroni", t.p_bonferroni},               {"significant", t.significant}};
  j["cohens_d"] = t.cohens_d ? nlohmann::json(*t.cohens_d) : nlohmann::json(nullptr);
  return j;
}

}  // namespace nst::stats
