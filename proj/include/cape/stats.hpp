#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cape::stats {

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// Regularized lower incomplete gamma P(a, x).
double incomplete_gamma(double a, double x);
double erf(double x);

double normal_cdf(double z);
// Upper tail P(T > t) for Student's t with `df` degrees of freedom.
double student_t_sf(double t, double df);
// Upper tail P(F > f).
double fisher_f_sf(double f, double df1, double df2);

enum class Method {
  kPearson,
  kSpearman,
  kWelchT,
  kStudentT,
  kWilcoxonExact,
  kWilcoxonNormal,
  kAnova,
  kCohensD,
};

std::string method_name(Method m);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::optional<double> effect_size;
  Method method = Method::kPearson;
  double df = 0.0;  // degrees of freedom where meaningful, else 0

  nlohmann::json to_json() const;
};

// Rows are observation units, columns are repeated measures.
using SampleMatrix = std::vector<std::vector<double>>;

// Average ranks (1-based); ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);

TestResult pearson(std::span<const double> x, std::span<const double> y);
TestResult spearman(std::span<const double> x, std::span<const double> y);

double cronbach_alpha(const SampleMatrix& m);
// Mean Pearson r over all column pairs.
double test_retest(const SampleMatrix& m);

TestResult welch_t(std::span<const double> a, std::span<const double> b);
TestResult student_t(std::span<const double> a, std::span<const double> b);

// Paired signed-rank test on a - b. Zero differences are dropped. The
// statistic is min(W+, W-). Exact for n <= 25 without tied magnitudes.
TestResult wilcoxon(std::span<const double> a, std::span<const double> b);

TestResult anova_oneway(const std::vector<std::vector<double>>& groups);

// (mean(dependent) - mean(free)) / pooled SD.
double cohens_d(std::span<const double> dependent, std::span<const double> free);

struct ConditionTests {
  TestResult t_test;
  std::optional<TestResult> wilcoxon;  // only when the samples are paired
  TestResult anova;
  double cohens_d = 0.0;

  nlohmann::json to_json() const;
};

ConditionTests condition_tests(std::span<const double> dependent, std::span<const double> free);

}  // namespace cape::stats
