#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "cape/error.hpp"
#include "cape/inventory.hpp"
#include "cape/metrics.hpp"

namespace fs = std::filesystem;
using namespace cape;

namespace {

using Series = std::vector<std::vector<double>>;

const fs::path kData = CAPE_DATA_DIR;

ScoringTrajectory traj(std::vector<int> scores) {
  ScoringTrajectory t{"t", std::move(scores), {}};
  for (std::size_t k = 0; k < t.scores.size(); ++k) t.item_ids.push_back("i" + std::to_string(k));
  return t;
}

double brute_union(const std::vector<Interval>& ivs) {
  std::vector<double> cuts;
  for (const auto& iv : ivs) {
    cuts.push_back(iv.lo);
    cuts.push_back(iv.hi);
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    for (const auto& iv : ivs) {
      if (iv.lo <= mid && mid <= iv.hi) {
        total += cuts[i + 1] - cuts[i];
        break;
      }
    }
  }
  return total;
}

TEST(Intervals, IntersectionExamples) {
  EXPECT_DOUBLE_EQ(intersect_width(std::vector<Interval>{{0, 2}, {1, 3}}), 1.0);
  EXPECT_DOUBLE_EQ(intersect_width(std::vector<Interval>{{0, 1}, {2, 3}}), 0.0);
  EXPECT_DOUBLE_EQ(intersect_width(std::vector<Interval>{{0, 2}, {1, 3}, {1.5, 2.5}}), 0.5);
  EXPECT_THROW(intersect_width(std::vector<Interval>{{0, 1}}), InvalidArgument);
}

TEST(Intervals, UnionExamples) {
  EXPECT_DOUBLE_EQ(union_width(std::vector<Interval>{{0, 2}, {1, 3}, {5, 6}}), 4.0);
  EXPECT_DOUBLE_EQ(union_width(std::vector<Interval>{{1, 4}, {1, 4}, {1, 4}}), 3.0);
  EXPECT_DOUBLE_EQ(union_width(std::vector<Interval>{{0, 1}, {1, 2}}), 2.0);
  EXPECT_DOUBLE_EQ(union_width(std::vector<Interval>{{2, 2}}), 0.0);
}

TEST(Intervals, UnionMatchesBruteForceOnRandomSets) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(-10, 10), len(0, 4);
  std::uniform_int_distribution<int> count(1, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Interval> ivs(count(rng));
    for (auto& iv : ivs) {
      iv.lo = pos(rng);
      iv.hi = iv.lo + len(rng);
    }
    const double u = union_width(ivs);
    EXPECT_NEAR(u, brute_union(ivs), 1e-9);
    if (ivs.size() >= 2) EXPECT_GE(u + 1e-12, intersect_width(ivs));
  }
}

TEST(Tar, Examples) {
  std::vector<ScoringTrajectory> same{traj({5, 4, 3}), traj({5, 4, 3}), traj({5, 4, 3})};
  EXPECT_DOUBLE_EQ(tar(same), 100.0);
  std::vector<ScoringTrajectory> half{traj({5, 5}), traj({5, 1}), traj({5, 5})};
  EXPECT_DOUBLE_EQ(tar(half), 50.0);
  std::vector<ScoringTrajectory> none{traj({1}), traj({2}), traj({3})};
  EXPECT_DOUBLE_EQ(tar(none), 0.0);
}

TEST(Ed, Examples) {
  std::vector<ScoringTrajectory> same{traj({5, 4}), traj({5, 4}), traj({5, 4})};
  EXPECT_DOUBLE_EQ(ed(same), 0.0);
  std::vector<ScoringTrajectory> ladder{traj({1, 1}), traj({2, 2}), traj({3, 3})};
  EXPECT_NEAR(ed(ladder), 4.0 / 3.0, 1e-15);
  std::vector<ScoringTrajectory> two{traj({1, 2, 3}), traj({2, 3, 4})};
  EXPECT_DOUBLE_EQ(ed(two), 1.0);
}

TEST(TarEd, RejectMismatchedRunSets) {
  std::vector<ScoringTrajectory> one{traj({1, 2})};
  EXPECT_THROW(tar(one), InvalidArgument);
  std::vector<ScoringTrajectory> ragged{traj({1, 2}), traj({1})};
  EXPECT_THROW(ed(ragged), InvalidArgument);
  auto a = traj({1, 2});
  auto b = traj({1, 2});
  b.item_ids = {"i1", "i0"};
  std::vector<ScoringTrajectory> reordered{a, b};
  EXPECT_THROW(tar(reordered), InvalidArgument);
}

TEST(Tc, IdenticalTrajectoriesGiveFullConsistency) {
  std::vector<int> s;
  for (int k = 0; k < 60; ++k) s.push_back(1 + (k * 7) % 5);
  std::vector<ScoringTrajectory> same{traj(s), traj(s), traj(s)};
  EXPECT_NEAR(tc(same), 100.0, 1e-6);
}

TEST(Tc, ConstantTrajectoriesAtDifferentLevels) {
  std::vector<ScoringTrajectory> flat{traj(std::vector<int>(40, 1)), traj(std::vector<int>(40, 3)),
                                      traj(std::vector<int>(40, 5))};
  EXPECT_NEAR(tc(flat), 100.0, 1e-6);
}

TEST(Tc, DetailExposesGridAndBoundedRatio) {
  std::mt19937_64 rng(2);
  Series s(3, std::vector<double>(50));
  for (auto& row : s)
    for (auto& v : row) v = 1.0 + static_cast<double>(rng() % 5);
  const auto d = tc_detail(s);
  EXPECT_EQ(d.query.size(), 200u);
  EXPECT_EQ(d.query.front(), 1.0);
  EXPECT_EQ(d.query.back(), 50.0);
  EXPECT_EQ(d.params.size(), 3u);
  for (double r : d.ratio) {
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
  EXPECT_GE(d.value, 0.0);
  EXPECT_LT(d.value, 100.0);
  Series long_series(2, std::vector<double>(75, 1.0));
  long_series[1][3] = 2.0;
  EXPECT_EQ(tc_detail(long_series).query.size(), 300u);
}

TEST(Tc, AffineTransformOfOneSeriesLeavesTcUnchanged) {
  std::mt19937_64 rng(8);
  Series s(3, std::vector<double>(60));
  for (auto& row : s)
    for (auto& v : row) v = 1.0 + static_cast<double>(rng() % 5);
  const double base = tc_series(s);
  for (double a : {0.5, 2.0, 10.0}) {
    for (double b : {-3.0, 7.0}) {
      auto t = s;
      for (auto& v : t[1]) v = a * v + b;
      EXPECT_NEAR(tc_series(t), base, 1e-6);
    }
  }
}

TEST(Tc, NoisierRunsScoreLower) {
  std::mt19937_64 rng(12);
  std::vector<double> truth(80);
  for (auto& v : truth) v = 1.0 + static_cast<double>(rng() % 5);
  auto perturbed = [&](double p, std::uint64_t seed) {
    std::mt19937_64 r(seed);
    std::uniform_real_distribution<double> u(0, 1);
    Series out;
    for (int run = 0; run < 3; ++run) {
      auto row = truth;
      for (auto& v : row) {
        if (u(r) < p) v = std::clamp(v + (u(r) < 0.5 ? -1.0 : 1.0), 1.0, 5.0);
      }
      out.push_back(row);
    }
    return out;
  };
  double quiet = 0, loud = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    quiet += tc_series(perturbed(0.05, seed));
    loud += tc_series(perturbed(0.4, seed));
  }
  EXPECT_GT(quiet, loud);
}

TEST(Oc, PermutationSeriesShape) {
  const std::vector<double> v{3.1, 2.5, 4.0, 3.3, 2.0};
  const auto s = permutation_series(v);
  ASSERT_EQ(s.size(), 600u);
  const std::vector<double> first(s.begin(), s.begin() + 5);
  EXPECT_EQ(first, (std::vector<double>{2.0, 2.5, 3.1, 3.3, 4.0}));
  const std::vector<double> last(s.end() - 5, s.end());
  EXPECT_EQ(last, (std::vector<double>{4.0, 3.3, 3.1, 2.5, 2.0}));
  EXPECT_EQ(permutation_series(std::vector<double>{1, 2, 3}).size(), 18u);
  OceanScore o{{3.1, 2.5, 4.0, 3.3, 2.0}};
  EXPECT_EQ(oc_series(o), s);
}

TEST(Oc, SeriesIsInvariantUnderTraitRelabeling) {
  OceanScore a{{3.1, 2.5, 4.0, 3.3, 2.0}};
  OceanScore relabeled{{2.0, 4.0, 3.1, 2.5, 3.3}};
  EXPECT_EQ(oc_series(a), oc_series(relabeled));
}

TEST(Oc, IdenticalVectorsAreFullyConsistent) {
  std::vector<OceanScore> v{OceanScore{{3.1, 2.5, 4.0, 3.3, 2.0}}, OceanScore{{3.1, 2.5, 4.0, 3.3, 2.0}}};
  EXPECT_GE(oc(v), 99.9);
}

TEST(Alignment, MaeAndMasking) {
  ScaledOcean human{OceanScore{{5, 5, 5, 5, 5}}};
  ScaledOcean model{OceanScore{{4, 4, 4, 4, 4}}};
  const auto r = ocean_alignment(human, model, {});
  EXPECT_DOUBLE_EQ(r.mae, 1.0);
  EXPECT_GE(r.oa, 99.9);

  ScaledOcean h2{OceanScore{{4, 2, 3, 5, 1}}};
  ScaledOcean m2{OceanScore{{4, 3, 3, 5, 5}}};
  const auto masked = ocean_alignment(h2, m2, {Trait::kN});
  EXPECT_DOUBLE_EQ(masked.mae, 0.25);
  EXPECT_EQ(masked.masked_traits, (std::set<Trait>{Trait::kN}));
  EXPECT_GE(masked.oa, 0.0);
  EXPECT_LE(masked.oa, 100.0);
  EXPECT_EQ(masked.to_json()["masked_traits"], nlohmann::json::array({"N"}));
}

TEST(Alignment, Errors) {
  ScaledOcean human{OceanScore{{5, 5, 5, 5, 5}}};
  ScaledOcean model{OceanScore{{4, 4, 4, 4, 4}}, "0-100"};
  EXPECT_THROW(ocean_alignment(human, model, {}), InvalidArgument);
  model.scale = "1-5";
  EXPECT_THROW(ocean_alignment(human, model, {Trait::kO, Trait::kC, Trait::kE, Trait::kA, Trait::kN}),
               InvalidArgument);
}

TEST(Report, StabilityRowOnConstantRuns) {
  const auto inv = load_inventory(kData / "inventories/toy_10.json");
  ScoringTrajectory t{"r1", {5, 1, 5, 1, 5, 1, 5, 1, 5, 1}, {}};
  for (const auto& it : inv.items()) t.item_ids.push_back(it.id);
  std::vector<ScoringTrajectory> runs{t, t, t};
  runs[1].run_id = "r2";
  runs[2].run_id = "r3";
  const auto r = consistency_report(runs, inv, "stability", {{"mode", "context-free"}});
  EXPECT_EQ(r.tar, 100.0);
  EXPECT_EQ(r.ed, 0.0);
  EXPECT_GE(r.tc, 99.9);
  EXPECT_GE(r.oc, 99.9);
  EXPECT_EQ(r.run_ids, (std::vector<std::string>{"r1", "r2", "r3"}));

  const auto back = ConsistencyReport::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
  EXPECT_EQ(ConsistencyReport::csv_header(), "factor,runs,tar,ed,tc,oc,invalid");
  EXPECT_TRUE(r.csv_row().starts_with("stability,r1;r2;r3,100.000000,0.000000,")) << r.csv_row();
}

TEST(Report, ValidationRejectsOutOfRangeValues) {
  ConsistencyReport r;
  r.tar = 101;
  EXPECT_THROW(r.validate(), Error);
  r.tar = 50;
  r.ed = -1;
  EXPECT_THROW(r.validate(), Error);
}

TEST(Format, FixedPrecisionWithoutNegativeZero) {
  EXPECT_EQ(format_number(-0.0), "0.000000");
  EXPECT_EQ(format_number(-1e-9), "0.000000");
  EXPECT_EQ(format_number(1.0 / 3.0, 3), "0.333");
}

}  // namespace
