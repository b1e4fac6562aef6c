#include <gtest/gtest.h>

#include <sstream>

#include "cape/error.hpp"
#include "cape/plot.hpp"

using namespace cape;
using namespace cape::plot;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<std::string> lines(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

Transcript transcript(const std::vector<int>& choices) {
  Transcript t;
  for (std::size_t k = 0; k < choices.size(); ++k) {
    TranscriptEntry e;
    e.presentation_index = static_cast<int>(k) + 1;
    e.item_id = "i" + std::to_string(k);
    e.semantic_index = choices[k];
    t.entries.push_back(e);
  }
  return t;
}

TEST(PlotKind, NamesRoundTrip) {
  for (const char* n : {"trajectory-lines", "ocean-bars", "diff-distribution", "option-area"}) {
    EXPECT_EQ(plot_kind_name(parse_plot_kind(n)), n);
  }
  EXPECT_THROW(parse_plot_kind("pie"), InvalidArgument);
}

TEST(DiffDistribution, IdenticalRunsGiveSingleBar) {
  ScoringTrajectory t{"r", {5, 3, 1, 2}, {"a", "b", "c", "d"}};
  const auto out = diff_distribution(diff_histogram(t, t), true);
  const auto rows = lines(out.csv);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0], "bucket,count");
  EXPECT_EQ(rows[1], "-4,0");
  EXPECT_EQ(rows[5], "0,4");
  EXPECT_EQ(count(out.svg, "class=\"bar\""), 1u);
}

TEST(OceanBars, TwoSettingsGiveFivePairedBars) {
  const auto out = ocean_bars({{"free", OceanScore{{3, 4, 2, 5, 1}}}, {"dependent", OceanScore{{3.5, 4, 2, 4, 2}}}},
                              true);
  EXPECT_EQ(lines(out.csv).size(), 11u);
  EXPECT_EQ(lines(out.csv)[1], "free,O,3.000000");
  EXPECT_EQ(count(out.svg, "class=\"bar\""), 10u);
}

TEST(OptionArea, TwoSeriesCarryAllFiveOptions) {
  const auto before = transcript({0, 1, 2, 2, 4, 3, 0, 0, 1, 2, 2, 2});
  const auto after = transcript({2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 1});
  const auto out = option_area({{"baseline", {before}}, {"forced", {after}}}, 5, true, true);
  const auto rows = lines(out.csv);
  // 2 series x 3 bins x 5 options + header.
  ASSERT_EQ(rows.size(), 31u);
  EXPECT_EQ(rows[0], "series,bin_start,bin_end,option,count");
  EXPECT_EQ(rows[1], "baseline,1,5,A,1");
  EXPECT_EQ(rows[3], "baseline,1,5,C,2");
  EXPECT_EQ(rows[30], "forced,11,12,E,0");
  EXPECT_EQ(rows[28], "forced,11,12,C,1");
  EXPECT_EQ(count(out.svg, "<polygon"), 10u);
}

TEST(OptionArea, RejectsEmptyInputs) {
  EXPECT_THROW(option_area({}, 5, false, true), InvalidArgument);
  EXPECT_THROW(option_area({{"x", {Transcript{}}}}, 5, false, true), InvalidArgument);
  EXPECT_THROW(option_area({{"x", {transcript({1})}}}, 0, false, true), InvalidArgument);
}

TEST(TrajectoryLines, CsvListsEveryPosition) {
  std::vector<ScoringTrajectory> trajs{{"r1", {5, 4}, {"a", "b"}}, {"r2", {3, 1}, {"a", "b"}}};
  const auto out = trajectory_lines(trajs, true);
  EXPECT_EQ(out.csv, "run_id,position,item_id,score\nr1,1,a,5\nr1,2,b,4\nr2,1,a,3\nr2,2,b,1\n");
  EXPECT_EQ(count(out.svg, "<polyline"), 2u);
}

TEST(Svg, DeterministicOutputOmitsTimestamp) {
  std::vector<ScoringTrajectory> trajs{{"r1", {5, 4}, {"a", "b"}}};
  EXPECT_EQ(trajectory_lines(trajs, true).svg, trajectory_lines(trajs, true).svg);
  EXPECT_EQ(trajectory_lines(trajs, true).svg.find("generated"), std::string::npos);
  EXPECT_NE(trajectory_lines(trajs, false).svg.find("generated"), std::string::npos);
}

TEST(Spline, EndpointsAreKeptAndCurveStaysInHull) {
  const std::vector<Point> pts{{0, 0}, {1, 1}, {2, 0}, {3, 1}};
  const auto s = quadratic_spline(pts, 4);
  EXPECT_EQ(s.front().x, 0);
  EXPECT_EQ(s.back().x, 3);
  EXPECT_EQ(s.back().y, 1);
  for (const auto& p : s) {
    EXPECT_GE(p.y, 0);
    EXPECT_LE(p.y, 1);
  }
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GT(s[i].x, s[i - 1].x);
  const std::vector<Point> two{{0, 0}, {1, 1}};
  EXPECT_EQ(quadratic_spline(two).size(), 2u);
}

}  // namespace
