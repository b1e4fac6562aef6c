#include "cape/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "cape/error.hpp"

namespace cape {

namespace {

void check_run_set(std::span<const ScoringTrajectory> trajs, const char* what) {
  if (trajs.size() < 2) throw InvalidArgument(std::string(what) + ": need at least two trajectories");
  const std::size_t m = trajs[0].size();
  if (m == 0) throw InvalidArgument(std::string(what) + ": empty trajectory");
  for (const auto& t : trajs) {
    if (t.size() != m) throw InvalidArgument(std::string(what) + ": trajectory length mismatch");
    if (!t.item_ids.empty() && !trajs[0].item_ids.empty() && t.item_ids != trajs[0].item_ids) {
      throw InvalidArgument(std::string(what) + ": trajectories use different presentation orders");
    }
  }
}

std::vector<double> as_doubles(const ScoringTrajectory& t) {
  return {t.scores.begin(), t.scores.end()};
}

}  // namespace

double intersect_width(std::span<const Interval> intervals) {
  if (intervals.size() < 2) throw InvalidArgument("intersect_width: need at least two intervals");
  double lo = intervals[0].lo, hi = intervals[0].hi;
  for (const auto& iv : intervals) {
    lo = std::max(lo, iv.lo);
    hi = std::min(hi, iv.hi);
  }
  return std::max(0.0, hi - lo);
}

double union_width(std::span<const Interval> intervals) {
  if (intervals.empty()) throw InvalidArgument("union_width: no intervals");
  std::vector<Interval> sorted(intervals.begin(), intervals.end());
  std::sort(sorted.begin(), sorted.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  double total = 0.0;
  double cur_lo = sorted[0].lo, cur_hi = sorted[0].hi;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].lo <= cur_hi) {
      cur_hi = std::max(cur_hi, sorted[i].hi);
    } else {
      total += cur_hi - cur_lo;
      cur_lo = sorted[i].lo;
      cur_hi = sorted[i].hi;
    }
  }
  return total + (cur_hi - cur_lo);
}

double tar(std::span<const ScoringTrajectory> trajs) {
  check_run_set(trajs, "tar");
  const std::size_t m = trajs[0].size();
  std::size_t agree = 0;
  for (std::size_t k = 0; k < m; ++k) {
    bool all = true;
    for (const auto& t : trajs) all = all && t.scores[k] == trajs[0].scores[k];
    agree += all ? 1 : 0;
  }
  return 100.0 * static_cast<double>(agree) / static_cast<double>(m);
}

double ed(std::span<const ScoringTrajectory> trajs) {
  check_run_set(trajs, "ed");
  const std::size_t m = trajs[0].size();
  const std::size_t n = trajs.size();
  long long sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = 0; k < m; ++k) sum += std::abs(trajs[i].scores[k] - trajs[j].scores[k]);
    }
  }
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  return static_cast<double>(sum) / (pairs * static_cast<double>(m));
}

TcDetail tc_detail(const std::vector<std::vector<double>>& series, const TcOptions& options) {
  if (series.size() < 2) throw InvalidArgument("tc: need at least two series");
  const std::size_t m = series[0].size();
  if (m < 2) throw InvalidArgument("tc: series must have at least two points");
  for (const auto& s : series) {
    if (s.size() != m) throw InvalidArgument("tc: series length mismatch");
  }

  TcDetail out;
  const std::size_t grid = std::max<std::size_t>(200, 4 * m);
  out.query = gp::linspace(1.0, static_cast<double>(m), grid);

  // Series that smooth to the same values share one fit.
  std::map<std::vector<double>, std::pair<std::vector<Interval>, gp::KernelParams>> fitted;
  std::vector<const std::vector<Interval>*> supports;
  for (const auto& s : series) {
    auto smoothed = gp::smooth_series(s, options.omega);
    auto it = fitted.find(smoothed.ys);
    if (it == fitted.end()) {
      auto post = gp::fit_gpr(smoothed.xs, smoothed.ys, out.query, options.fit);
      it = fitted.emplace(smoothed.ys, std::make_pair(gp::support_interval(post, options.z), post.params)).first;
    }
    supports.push_back(&it->second.first);
    out.params.push_back(it->second.second);
  }

  out.ratio.resize(grid);
  std::vector<Interval> at(series.size());
  for (std::size_t g = 0; g < grid; ++g) {
    for (std::size_t i = 0; i < series.size(); ++i) at[i] = (*supports[i])[g];
    const double w_union = union_width(at);
    out.ratio[g] = w_union < 1e-12 ? 1.0 : std::clamp(intersect_width(at) / w_union, 0.0, 1.0);
  }
  double acc = 0.0;
  for (std::size_t g = 0; g + 1 < grid; ++g) acc += 0.5 * (out.ratio[g] + out.ratio[g + 1]);
  out.value = 100.0 * acc / static_cast<double>(grid - 1);
  return out;
}

double tc_series(const std::vector<std::vector<double>>& series, const TcOptions& options) {
  return tc_detail(series, options).value;
}

double tc(std::span<const ScoringTrajectory> trajs, const TcOptions& options) {
  check_run_set(trajs, "tc");
  std::vector<std::vector<double>> series;
  for (const auto& t : trajs) series.push_back(as_doubles(t));
  return tc_series(series, options);
}

std::vector<double> permutation_series(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("permutation_series: no values");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::vector<double>> tuples;
  do {
    std::vector<double> t;
    for (std::size_t i : idx) t.push_back(values[i]);
    tuples.push_back(std::move(t));
  } while (std::next_permutation(idx.begin(), idx.end()));
  std::sort(tuples.begin(), tuples.end());
  std::vector<double> out;
  out.reserve(tuples.size() * values.size());
  for (const auto& t : tuples) out.insert(out.end(), t.begin(), t.end());
  return out;
}

std::vector<double> oc_series(const OceanScore& score) { return permutation_series(score.values); }

double oc(std::span<const OceanScore> vectors, const TcOptions& options) {
  if (vectors.size() < 2) throw InvalidArgument("oc: need at least two OCEAN vectors");
  std::vector<std::vector<double>> series;
  for (const auto& v : vectors) series.push_back(oc_series(v));
  return tc_series(series, options);
}

nlohmann::json AlignmentReport::to_json() const {
  nlohmann::json masked = nlohmann::json::array();
  for (Trait t : masked_traits) masked.push_back(std::string(1, trait_letter(t)));
  return {{"oa", oa}, {"mae", mae}, {"masked_traits", masked}};
}

AlignmentReport ocean_alignment(const ScaledOcean& human, const ScaledOcean& model,
                                const std::set<Trait>& mask, const TcOptions& options) {
  if (human.scale != model.scale) {
    throw InvalidArgument("ocean_alignment: scale mismatch (" + human.scale + " vs " + model.scale + ")");
  }
  std::vector<double> h, m;
  for (Trait t : kAllTraits) {
    if (mask.count(t)) continue;
    h.push_back(human.score[t]);
    m.push_back(model.score[t]);
  }
  if (h.empty()) throw InvalidArgument("ocean_alignment: every trait is masked");
  if (h.size() < 2) throw InvalidArgument("ocean_alignment: need at least two unmasked traits");

  AlignmentReport r;
  r.masked_traits = mask;
  double total = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) total += std::abs(h[i] - m[i]);
  r.mae = total / static_cast<double>(h.size());
  r.oa = tc_series({permutation_series(h), permutation_series(m)}, options);
  return r;
}

void ConsistencyReport::validate() const {
  auto pct = [](double v) { return v >= 0.0 && v <= 100.0; };
  if (!pct(tar) || !pct(tc) || !pct(oc)) throw SchemaError("report: percentages must lie in [0, 100]");
  if (ed < 0.0) throw SchemaError("report: ed must be non-negative");
  if (oa && !pct(*oa)) throw SchemaError("report: oa must lie in [0, 100]");
  if (mae && *mae < 0.0) throw SchemaError("report: mae must be non-negative");
}

nlohmann::json ConsistencyReport::to_json() const {
  nlohmann::json j = {{"schema_version", 1}, {"tar", tar}, {"ed", ed}, {"tc", tc}, {"oc", oc},
                      {"run_ids", run_ids}, {"factor", factor}, {"settings", settings}};
  if (oa) j["oa"] = *oa;
  if (mae) j["mae"] = *mae;
  if (invalid) j["invalid"] = true;
  return j;
}

ConsistencyReport ConsistencyReport::from_json(const nlohmann::json& j) {
  try {
    ConsistencyReport r;
    r.tar = j.at("tar").get<double>();
    r.ed = j.at("ed").get<double>();
    r.tc = j.at("tc").get<double>();
    r.oc = j.at("oc").get<double>();
    r.run_ids = j.value("run_ids", std::vector<std::string>{});
    r.factor = j.value("factor", std::string{});
    r.settings = j.value("settings", nlohmann::json::object());
    if (j.contains("oa")) r.oa = j.at("oa").get<double>();
    if (j.contains("mae")) r.mae = j.at("mae").get<double>();
    r.invalid = j.value("invalid", false);
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("report: ") + e.what());
  }
}

std::string ConsistencyReport::csv_header() { return "factor,runs,tar,ed,tc,oc,invalid"; }

std::string ConsistencyReport::csv_row() const {
  std::string runs;
  for (std::size_t i = 0; i < run_ids.size(); ++i) runs += (i ? ";" : "") + run_ids[i];
  return factor + "," + runs + "," + format_number(tar) + "," + format_number(ed) + "," + format_number(tc) +
         "," + format_number(oc) + "," + (invalid ? "true" : "false");
}

ConsistencyReport consistency_report(std::span<const ScoringTrajectory> trajs, const Inventory& inv,
                                     const std::string& factor, const nlohmann::json& settings,
                                     const TcOptions& options) {
  ConsistencyReport r;
  r.tar = tar(trajs);
  r.ed = ed(trajs);
  r.tc = tc(trajs, options);
  std::vector<OceanScore> vectors;
  for (const auto& t : trajs) {
    vectors.push_back(ocean_score(t, inv));
    r.run_ids.push_back(t.run_id);
  }
  r.oc = oc(vectors, options);
  r.factor = factor;
  r.settings = settings;
  r.validate();
  return r;
}

std::string format_number(double v, int decimals) {
  if (std::abs(v) < 0.5 * std::pow(10.0, -decimals)) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace cape
