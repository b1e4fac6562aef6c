#include "cape/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "cape/error.hpp"

namespace cape::stats {

namespace {

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample variance (n - 1 denominator).
double variance(std::span<const double> v) {
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size() - 1);
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + ": non-finite value");
  }
}

double clamp_p(double p) { return std::clamp(p, 0.0, 1.0); }

void check_matrix(const SampleMatrix& m, const char* what) {
  if (m.size() < 2) throw InvalidArgument(std::string(what) + ": need at least two rows");
  const std::size_t k = m[0].size();
  if (k < 2) throw InvalidArgument(std::string(what) + ": need at least two columns");
  for (const auto& row : m) {
    if (row.size() != k) throw InvalidArgument(std::string(what) + ": matrix is not rectangular");
    check_finite(row, what);
  }
}

std::vector<double> column(const SampleMatrix& m, std::size_t j) {
  std::vector<double> c;
  c.reserve(m.size());
  for (const auto& row : m) c.push_back(row[j]);
  return c;
}

TestResult correlation(std::span<const double> x, std::span<const double> y, Method method) {
  const double n = static_cast<double>(x.size());
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw NumericalError("correlation: zero variance input");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  TestResult res;
  res.statistic = r;
  res.method = method;
  res.df = n - 2;
  const double one_minus = 1.0 - r * r;
  if (one_minus <= 0.0) {
    res.p_value = 0.0;
  } else {
    const double t = r * std::sqrt((n - 2) / one_minus);
    res.p_value = clamp_p(2.0 * student_t_sf(std::abs(t), n - 2));
  }
  return res;
}

void check_pair(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw InvalidArgument(std::string(what) + ": length mismatch");
  if (x.size() < 3) throw InvalidArgument(std::string(what) + ": need at least three observations");
  check_finite(x, what);
  check_finite(y, what);
}

void check_groups(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument(std::string(what) + ": each group needs >= 2 values");
  check_finite(a, what);
  check_finite(b, what);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0) || !(x >= 0 && x <= 1)) throw InvalidArgument("incomplete_beta: domain error");
  return boost::math::ibeta(a, b, x);
}

double incomplete_gamma(double a, double x) {
  if (!(a > 0) || !(x >= 0)) throw InvalidArgument("incomplete_gamma: domain error");
  return boost::math::gamma_p(a, x);
}

double erf(double x) {
  if (std::isnan(x)) throw InvalidArgument("erf: NaN input");
  return boost::math::erf(x);
}

double normal_cdf(double z) { return 0.5 * boost::math::erfc(-z / std::sqrt(2.0)); }

double student_t_sf(double t, double df) {
  if (!(df > 0)) throw InvalidArgument("student_t_sf: df must be positive");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::students_t(df), t));
}

double fisher_f_sf(double f, double df1, double df2) {
  if (!(df1 > 0) || !(df2 > 0)) throw InvalidArgument("fisher_f_sf: df must be positive");
  if (f <= 0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::fisher_f(df1, df2), f));
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kPearson: return "pearson";
    case Method::kSpearman: return "spearman";
    case Method::kWelchT: return "welch_t";
    case Method::kStudentT: return "student_t";
    case Method::kWilcoxonExact: return "wilcoxon_exact";
    case Method::kWilcoxonNormal: return "wilcoxon_normal";
    case Method::kAnova: return "anova";
    case Method::kCohensD: return "cohens_d";
  }
  return "unknown";
}

nlohmann::json TestResult::to_json() const {
  nlohmann::json j = {{"method", method_name(method)}, {"statistic", statistic}, {"p_value", p_value}};
  if (df > 0) j["df"] = df;
  if (effect_size) j["effect_size"] = *effect_size;
  return j;
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

TestResult pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "pearson");
  return correlation(x, y, Method::kPearson);
}

TestResult spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "spearman");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return correlation(rx, ry, Method::kSpearman);
}

double cronbach_alpha(const SampleMatrix& m) {
  check_matrix(m, "cronbach_alpha");
  const std::size_t k = m[0].size();
  double item_var = 0.0;
  for (std::size_t j = 0; j < k; ++j) item_var += variance(column(m, j));
  std::vector<double> totals;
  for (const auto& row : m) totals.push_back(std::accumulate(row.begin(), row.end(), 0.0));
  const double total_var = variance(totals);
  if (total_var <= 0.0) throw NumericalError("cronbach_alpha: zero total-score variance");
  const double kd = static_cast<double>(k);
  return kd / (kd - 1.0) * (1.0 - item_var / total_var);
}

double test_retest(const SampleMatrix& m) {
  check_matrix(m, "test_retest");
  if (m.size() < 3) throw InvalidArgument("test_retest: need at least three rows");
  const std::size_t k = m[0].size();
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      sum += correlation(column(m, i), column(m, j), Method::kPearson).statistic;
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

TestResult welch_t(std::span<const double> a, std::span<const double> b) {
  check_groups(a, b, "welch_t");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = variance(a) / na, vb = variance(b) / nb;
  if (va + vb <= 0.0) throw NumericalError("welch_t: both groups have zero variance");
  TestResult r;
  r.method = Method::kWelchT;
  r.statistic = (mean(a) - mean(b)) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1) + vb * vb / (nb - 1));
  r.p_value = clamp_p(2.0 * student_t_sf(std::abs(r.statistic), r.df));
  return r;
}

TestResult student_t(std::span<const double> a, std::span<const double> b) {
  check_groups(a, b, "student_t");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sp2 = ((na - 1) * variance(a) + (nb - 1) * variance(b)) / (na + nb - 2);
  if (sp2 <= 0.0) throw NumericalError("student_t: zero pooled variance");
  TestResult r;
  r.method = Method::kStudentT;
  r.statistic = (mean(a) - mean(b)) / std::sqrt(sp2 * (1 / na + 1 / nb));
  r.df = na + nb - 2;
  r.p_value = clamp_p(2.0 * student_t_sf(std::abs(r.statistic), r.df));
  return r;
}

TestResult wilcoxon(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("wilcoxon: paired samples must have equal length");
  check_finite(a, "wilcoxon");
  check_finite(b, "wilcoxon");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }
  if (d.empty()) throw NumericalError("wilcoxon: all paired differences are zero");

  std::vector<double> mag(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
  const auto ranks = average_ranks(mag);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? w_plus : w_minus) += ranks[i];
  const double stat = std::min(w_plus, w_minus);
  const std::size_t n = d.size();

  // Tie correction term sum(t^3 - t) over groups of equal magnitude.
  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  TestResult r;
  r.statistic = stat;
  if (n <= 25 && tie_term == 0.0) {
    // Null distribution of W+ by counting subsets of {1..n} per rank sum.
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<double> counts(max_sum + 1, 0.0);
    counts[0] = 1.0;
    for (std::size_t k = 1; k <= n; ++k) {
      for (std::size_t s = max_sum; s >= k; --s) counts[s] += counts[s - k];
    }
    const auto limit = static_cast<std::size_t>(std::llround(stat));
    double cdf = 0.0;
    for (std::size_t s = 0; s <= limit; ++s) cdf += counts[s];
    cdf /= std::ldexp(1.0, static_cast<int>(n));
    r.method = Method::kWilcoxonExact;
    r.p_value = clamp_p(2.0 * cdf);
  } else {
    const double nd = static_cast<double>(n);
    const double mu = nd * (nd + 1) / 4.0;
    const double var = nd * (nd + 1) * (2 * nd + 1) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) throw NumericalError("wilcoxon: degenerate null variance");
    double diff = stat - mu;
    if (diff != 0.0) diff -= 0.5 * (diff > 0 ? 1.0 : -1.0);
    const double z = diff / std::sqrt(var);
    r.method = Method::kWilcoxonNormal;
    r.p_value = clamp_p(2.0 * normal_cdf(-std::abs(z)));
  }
  return r;
}

TestResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw InvalidArgument("anova: need at least two groups");
  double grand = 0.0;
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw InvalidArgument("anova: each group needs >= 2 values");
    check_finite(g, "anova");
    grand += std::accumulate(g.begin(), g.end(), 0.0);
    total += g.size();
  }
  grand /= static_cast<double>(total);
  double ss_between = 0.0, ss_within = 0.0;
  for (const auto& g : groups) {
    const double mu = mean(g);
    ss_between += static_cast<double>(g.size()) * (mu - grand) * (mu - grand);
    for (double x : g) ss_within += (x - mu) * (x - mu);
  }
  const double df1 = static_cast<double>(groups.size() - 1);
  const double df2 = static_cast<double>(total - groups.size());
  if (ss_within <= 0.0) throw NumericalError("anova: zero within-group variance");
  TestResult r;
  r.method = Method::kAnova;
  r.statistic = (ss_between / df1) / (ss_within / df2);
  r.df = df1;
  r.p_value = clamp_p(fisher_f_sf(r.statistic, df1, df2));
  return r;
}

double cohens_d(std::span<const double> dependent, std::span<const double> free) {
  check_groups(dependent, free, "cohens_d");
  const double n1 = static_cast<double>(dependent.size()), n2 = static_cast<double>(free.size());
  const double sp2 = ((n1 - 1) * variance(dependent) + (n2 - 1) * variance(free)) / (n1 + n2 - 2);
  const double diff = mean(dependent) - mean(free);
  if (sp2 <= 0.0) {
    if (diff == 0.0) return 0.0;
    throw NumericalError("cohens_d: zero pooled variance");
  }
  return diff / std::sqrt(sp2);
}

nlohmann::json ConditionTests::to_json() const {
  nlohmann::json j = {{"t_test", t_test.to_json()}, {"anova", anova.to_json()}, {"cohens_d", cohens_d}};
  j["wilcoxon"] = wilcoxon ? wilcoxon->to_json() : nlohmann::json();
  return j;
}

ConditionTests condition_tests(std::span<const double> dependent, std::span<const double> free) {
  ConditionTests c;
  c.t_test = welch_t(dependent, free);
  c.cohens_d = cohens_d(dependent, free);
  c.t_test.effect_size = c.cohens_d;
  if (dependent.size() == free.size()) c.wilcoxon = wilcoxon(dependent, free);
  c.anova = anova_oneway({std::vector<double>(dependent.begin(), dependent.end()),
                          std::vector<double>(free.begin(), free.end())});
  return c;
}

}  // namespace cape::stats
