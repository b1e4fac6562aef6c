#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cape/gp.hpp"
#include "cape/interval.hpp"
#include "cape/inventory.hpp"
#include "cape/scoring.hpp"

namespace cape {

// max(0, min hi - max lo). Requires at least two intervals.
double intersect_width(std::span<const Interval> intervals);

// Total length of the union, merging overlapping or touching intervals.
double union_width(std::span<const Interval> intervals);

// Percentage of positions where every trajectory has the same score.
double tar(std::span<const ScoringTrajectory> trajs);

// Mean absolute score gap over all trajectory pairs and positions.
double ed(std::span<const ScoringTrajectory> trajs);

struct TcOptions {
  int omega = 4;
  double z = 1.96;
  gp::FitOptions fit;
};

struct TcDetail {
  double value = 0.0;              // percentage
  std::vector<double> query;       // shared grid over [1, m]
  std::vector<double> ratio;       // W_int / W_union at each query point
  std::vector<gp::KernelParams> params;  // fitted hyperparameters per series
};

// Trajectory consistency of real-valued series of equal length m >= 2.
TcDetail tc_detail(const std::vector<std::vector<double>>& series, const TcOptions& options = {});
double tc_series(const std::vector<std::vector<double>>& series, const TcOptions& options = {});
double tc(std::span<const ScoringTrajectory> trajs, const TcOptions& options = {});

// All k! orderings of `values`, sorted lexicographically and concatenated.
std::vector<double> permutation_series(std::span<const double> values);
// permutation_series of the five trait scores (600 points).
std::vector<double> oc_series(const OceanScore& score);

double oc(std::span<const OceanScore> vectors, const TcOptions& options = {});

struct ScaledOcean {
  OceanScore score;
  std::string scale = "1-5";  // declared score scale label
};

struct AlignmentReport {
  double oa = 0.0;
  double mae = 0.0;
  std::set<Trait> masked_traits;

  nlohmann::json to_json() const;
};

// OA is OC over the unmasked traits of the two vectors; MAE averages
// |human - model| over the same traits.
AlignmentReport ocean_alignment(const ScaledOcean& human, const ScaledOcean& model,
                                const std::set<Trait>& mask, const TcOptions& options = {});

struct ConsistencyReport {
  double tar = 0.0;
  double ed = 0.0;
  double tc = 0.0;
  double oc = 0.0;
  std::optional<double> oa;
  std::optional<double> mae;
  std::vector<std::string> run_ids;
  std::string factor;
  nlohmann::json settings = nlohmann::json::object();
  bool invalid = false;

  void validate() const;
  nlohmann::json to_json() const;
  static ConsistencyReport from_json(const nlohmann::json& j);

  static std::string csv_header();
  std::string csv_row() const;
};

// Per-item metrics over the trajectories plus OC over their OCEAN vectors.
ConsistencyReport consistency_report(std::span<const ScoringTrajectory> trajs, const Inventory& inv,
                                     const std::string& factor = {},
                                     const nlohmann::json& settings = nlohmann::json::object(),
                                     const TcOptions& options = {});

// Fixed-precision formatting shared by every CSV writer.
std::string format_number(double v, int decimals = 6);

}  // namespace cape
