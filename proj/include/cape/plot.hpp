#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cape/scoring.hpp"
#include "cape/session.hpp"

namespace cape::plot {

enum class PlotKind { kTrajectoryLines, kOceanBars, kDiffDistribution, kOptionArea };

PlotKind parse_plot_kind(std::string_view name);
std::string plot_kind_name(PlotKind kind);

// The CSV is the data of record; the SVG is a static rendering of it.
struct PlotOutput {
  std::string csv;
  std::string svg;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Quadratic B-spline through the midpoints of consecutive points, anchored at
// both ends. Returns `samples` points per segment.
std::vector<Point> quadratic_spline(const std::vector<Point>& pts, int samples = 8);

PlotOutput trajectory_lines(const std::vector<ScoringTrajectory>& trajs, bool deterministic);

PlotOutput ocean_bars(const std::vector<std::pair<std::string, OceanScore>>& settings, bool deterministic);

PlotOutput diff_distribution(const DiffHistogram& hist, bool deterministic);

// Option choice counts (A-E by semantic index) per bin of `bin_size`
// presentation positions, one series per named transcript group.
PlotOutput option_area(const std::vector<std::pair<std::string, std::vector<Transcript>>>& series, int bin_size,
                       bool spline, bool deterministic);

}  // namespace cape::plot
