#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cape/error.hpp"
#include "cape/stats.hpp"
#include "reference_values.hpp"

using namespace cape;
using namespace cape::stats;
using Vec = std::vector<double>;

namespace {

void expect_rel(double got, double want, double rel) {
  EXPECT_LE(std::abs(got - want), rel * std::abs(want)) << "got " << got << " want " << want;
}

TEST(SpecialFunctions, TabulatedReferences) {
  for (const auto& p : cape_ref::kErf) expect_rel(stats::erf(p.x), p.value, 1e-10);
  for (const auto& p : cape_ref::kIncompleteBeta) expect_rel(incomplete_beta(p.a, p.b, p.x), p.value, 1e-10);
  for (const auto& p : cape_ref::kIncompleteGamma) expect_rel(incomplete_gamma(p.a, p.x), p.value, 1e-10);
}

TEST(SpecialFunctions, EdgeValuesAndDomain) {
  EXPECT_EQ(stats::erf(0), 0);
  EXPECT_EQ(incomplete_beta(2, 3, 1), 1);
  EXPECT_EQ(incomplete_beta(2, 3, 0), 0);
  EXPECT_NEAR(normal_cdf(0), 0.5, 1e-16);
  EXPECT_NEAR(normal_cdf(1.96), 0.9750021048517795, 1e-12);
  EXPECT_NEAR(student_t_sf(0, 5), 0.5, 1e-15);
  EXPECT_THROW(incomplete_beta(-1, 2, 0.5), Error);
  EXPECT_THROW(incomplete_beta(1, 2, 1.5), Error);
  EXPECT_THROW(incomplete_gamma(0, 1), Error);
}

TEST(Correlation, ExactLines) {
  EXPECT_NEAR(pearson(Vec{1, 2, 3}, Vec{2, 4, 6}).statistic, 1.0, 1e-12);
  EXPECT_NEAR(pearson(Vec{1, 2, 3, 4}, Vec{-1, -2, -3, -4}).statistic, -1.0, 1e-12);
  const Vec x = cape_ref::fixture_x(30);
  Vec y;
  for (double v : x) y.push_back(3.5 * v - 2);
  EXPECT_NEAR(pearson(x, y).statistic, 1.0, 1e-12);
  Vec cubed;
  for (double v : x) cubed.push_back(v * v * v);
  EXPECT_NEAR(spearman(x, cubed).statistic, 1.0, 1e-12);
}

TEST(Correlation, AverageRanksForTies) {
  EXPECT_EQ(average_ranks(Vec{1, 2, 2, 3}), (Vec{1, 2.5, 2.5, 4}));
  EXPECT_EQ(average_ranks(Vec{5, 1, 5, 5}), (Vec{3, 1, 3, 3}));
}

TEST(Correlation, FixtureMatchesReference) {
  const auto x = cape_ref::fixture_x(30), y = cape_ref::fixture_y(30);
  const auto r = pearson(x, y);
  EXPECT_NEAR(r.statistic, cape_ref::kPearsonR, 1e-6);
  expect_rel(r.p_value, cape_ref::kPearsonP, 1e-6);
  EXPECT_EQ(r.df, 28);
  const auto s = spearman(x, y);
  EXPECT_NEAR(s.statistic, cape_ref::kSpearmanRho, 1e-6);
  expect_rel(s.p_value, cape_ref::kSpearmanP, 1e-6);
  EXPECT_EQ(method_name(s.method), "spearman");
}

TEST(Correlation, DegenerateInputsAreRejected) {
  EXPECT_THROW(pearson(Vec{1, 2}, Vec{1, 2}), InvalidArgument);
  EXPECT_THROW(pearson(Vec{1, 1, 1}, Vec{1, 2, 3}), Error);
  EXPECT_THROW(pearson(Vec{1, 2, 3}, Vec{1, 2}), InvalidArgument);
}

TEST(Reliability, AlphaFixtureAndProperties) {
  EXPECT_NEAR(cronbach_alpha(cape_ref::kAlphaRows), cape_ref::kAlpha, 1e-9);
  auto shifted = cape_ref::kAlphaRows;
  for (auto& row : shifted) row[1] += 10;
  EXPECT_NEAR(cronbach_alpha(shifted), cape_ref::kAlpha, 1e-12);
  SampleMatrix same{{1, 1, 1}, {3, 3, 3}, {2, 2, 2}, {5, 5, 5}};
  EXPECT_NEAR(cronbach_alpha(same), 1.0, 1e-12);
  SampleMatrix flat{{2, 2}, {2, 2}, {2, 2}};
  EXPECT_THROW(cronbach_alpha(flat), Error);
}

TEST(Reliability, AlphaNearZeroForIndependentColumns) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    SampleMatrix m(1000, Vec(3));
    for (auto& row : m)
      for (auto& v : row) v = n(rng);
    EXPECT_LT(cronbach_alpha(m), 0.2) << seed;
  }
}

TEST(Reliability, TestRetest) {
  EXPECT_NEAR(test_retest(cape_ref::kAlphaRows), cape_ref::kTestRetest, 1e-6);
  SampleMatrix dup{{1, 1}, {2, 2}, {4, 4}};
  EXPECT_NEAR(test_retest(dup), 1.0, 1e-12);
  SampleMatrix lines{{1, 2, 3}, {2, 4, 6}, {3, 6, 9}, {5, 10, 15}};
  EXPECT_NEAR(test_retest(lines), 1.0, 1e-12);
}

TEST(GroupTests, WelchFixture) {
  const auto r = welch_t(cape_ref::kGroupA, cape_ref::kGroupB);
  EXPECT_NEAR(r.statistic, cape_ref::kWelchT, 1e-6);
  EXPECT_NEAR(r.df, cape_ref::kWelchDf, 1e-6);
  expect_rel(r.p_value, cape_ref::kWelchP, 1e-6);
  const auto swapped = welch_t(cape_ref::kGroupB, cape_ref::kGroupA);
  EXPECT_NEAR(swapped.statistic, -r.statistic, 1e-12);
  EXPECT_NEAR(swapped.p_value, r.p_value, 1e-15);
}

TEST(GroupTests, AnovaFixture) {
  const auto r = anova_oneway({cape_ref::kGroupA, cape_ref::kGroupB, cape_ref::kGroupC});
  EXPECT_NEAR(r.statistic, cape_ref::kAnova3F, 1e-6);
  expect_rel(r.p_value, cape_ref::kAnova3P, 1e-6);
  EXPECT_THROW(anova_oneway({cape_ref::kGroupA}), InvalidArgument);
}

TEST(GroupTests, TwoGroupAnovaIsStudentTSquared) {
  const auto t = student_t(cape_ref::kGroupA, cape_ref::kGroupB);
  const auto f = anova_oneway({cape_ref::kGroupA, cape_ref::kGroupB});
  EXPECT_NEAR(f.statistic, t.statistic * t.statistic, 1e-9);
  EXPECT_NEAR(f.p_value, t.p_value, 1e-9);
}

TEST(GroupTests, WilcoxonExactFixture) {
  const auto r = wilcoxon(cape_ref::kGroupA, cape_ref::paired_b());
  EXPECT_EQ(r.method, Method::kWilcoxonExact);
  EXPECT_EQ(r.statistic, cape_ref::kWilcoxonExactW);
  expect_rel(r.p_value, cape_ref::kWilcoxonExactP, 1e-6);
}

TEST(GroupTests, WilcoxonNormalFixture) {
  const auto r = wilcoxon(cape_ref::ladder(17, 23), cape_ref::ladder(11, 19));
  EXPECT_EQ(r.method, Method::kWilcoxonNormal);
  EXPECT_EQ(r.statistic, cape_ref::kWilcoxonNormalW);
  expect_rel(r.p_value, cape_ref::kWilcoxonNormalP, 1e-6);
}

TEST(GroupTests, WilcoxonBranchesAgreeAtTwentyFive) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.3, 1.0);
    Vec a(25), b(25, 0.0);
    for (auto& v : a) v = n(rng);
    const auto exact = wilcoxon(a, b);
    ASSERT_EQ(exact.method, Method::kWilcoxonExact);
    const double mu = 25.0 * 26 / 4, sd = std::sqrt(25.0 * 26 * 51 / 24);
    double diff = exact.statistic - mu;
    diff -= 0.5 * (diff > 0 ? 1 : -1);
    const double approx = std::erfc(std::abs(diff / sd) / std::sqrt(2.0));
    EXPECT_NEAR(exact.p_value, approx, 0.01) << seed;
  }
}

TEST(GroupTests, WilcoxonRejectsAllZeroDifferences) {
  EXPECT_THROW(wilcoxon(Vec{1, 2, 3}, Vec{1, 2, 3}), Error);
  EXPECT_THROW(wilcoxon(Vec{1, 2, 3}, Vec{1, 2}), InvalidArgument);
}

TEST(GroupTests, CohensD) {
  EXPECT_EQ(cohens_d(Vec{1, 2, 3}, Vec{1, 2, 3}), 0.0);
  EXPECT_NEAR(cohens_d(Vec{2, 4}, Vec{0, 2}), 2 / std::sqrt(2.0), 1e-12);
  EXPECT_LT(cohens_d(Vec{0, 1, 2}, Vec{2, 3, 4}), 0.0);
}

TEST(ConditionTests, BundleAndPValueRange) {
  const auto a = cape_ref::kGroupA;
  const auto b = cape_ref::paired_b();
  const auto ct = condition_tests(a, b);
  ASSERT_TRUE(ct.wilcoxon.has_value());
  EXPECT_EQ(ct.t_test.method, Method::kWelchT);
  EXPECT_DOUBLE_EQ(*ct.t_test.effect_size, ct.cohens_d);
  for (const auto* r : {&ct.t_test, &*ct.wilcoxon, &ct.anova}) {
    EXPECT_GE(r->p_value, 0.0);
    EXPECT_LE(r->p_value, 1.0);
  }
  const auto j = ct.to_json();
  EXPECT_TRUE(j.contains("t_test"));
  EXPECT_TRUE(j.contains("cohens_d"));
  const auto unpaired = condition_tests(cape_ref::kGroupA, cape_ref::kGroupB);
  EXPECT_FALSE(unpaired.wilcoxon.has_value());
  EXPECT_THROW(condition_tests(Vec{1}, Vec{1, 2}), InvalidArgument);
}

}  // namespace
