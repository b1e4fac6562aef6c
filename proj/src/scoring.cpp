#include "cape/scoring.hpp"

#include <algorithm>
#include <unordered_map>

#include "cape/session.hpp"

namespace cape {

int score_response(const InventoryItem& item, int semantic_index) {
  if (semantic_index < 0 || semantic_index > 4) {
    throw InvalidArgument("semantic index out of range: " + std::to_string(semantic_index));
  }
  return item.key == Key::kPositive ? 5 - semantic_index : 1 + semantic_index;
}

int score_response(const InventoryItem& item, const ParsedChoice& choice) {
  return score_response(item, choice.semantic_index);
}

void ScoringTrajectory::validate() const {
  if (scores.size() != item_ids.size()) {
    throw InvalidArgument("trajectory '" + run_id + "': scores and item ids differ in length");
  }
  for (int s : scores) {
    if (s < 1 || s > 5) throw InvalidArgument("trajectory '" + run_id + "': score out of range");
  }
}

ScoringTrajectory trajectory_from_transcript(const Transcript& t) {
  if (t.invalid) throw InvalidTranscript("transcript '" + t.run_id + "' is marked invalid");
  ScoringTrajectory traj;
  traj.run_id = t.run_id;
  traj.scores.reserve(t.entries.size());
  for (const auto& e : t.entries) {
    if (!e.score) {
      throw InvalidTranscript("transcript '" + t.run_id + "' has no score for item '" +
                              e.item_id + "'");
    }
    traj.scores.push_back(*e.score);
    traj.item_ids.push_back(e.item_id);
  }
  traj.validate();
  return traj;
}

OceanScore ocean_score(const ScoringTrajectory& traj, const Inventory& inv) {
  traj.validate();
  if (traj.size() != inv.size()) {
    throw InvalidArgument("trajectory covers " + std::to_string(traj.size()) + " items, inventory has " +
                          std::to_string(inv.size()));
  }
  std::array<double, 5> sum{};
  std::array<int, 5> count{};
  std::vector<bool> seen(inv.size(), false);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto idx = inv.index_of(traj.item_ids[k]);
    if (seen[idx]) throw InvalidArgument("trajectory repeats item '" + traj.item_ids[k] + "'");
    seen[idx] = true;
    const int t = static_cast<int>(inv.items()[idx].trait);
    sum[t] += traj.scores[k];
    ++count[t];
  }
  OceanScore out;
  for (int t = 0; t < 5; ++t) out.values[t] = sum[t] / count[t];
  return out;
}

std::size_t DiffHistogram::total() const {
  std::size_t n = 0;
  for (const auto& [_, c] : buckets) n += c;
  return n;
}

DiffHistogram diff_histogram(const ScoringTrajectory& dependent, const ScoringTrajectory& free) {
  dependent.validate();
  free.validate();
  if (dependent.size() != free.size()) {
    throw InvalidArgument("diff_histogram: trajectories differ in length");
  }
  std::unordered_map<std::string, int> free_by_id;
  for (std::size_t k = 0; k < free.size(); ++k) free_by_id.emplace(free.item_ids[k], free.scores[k]);
  DiffHistogram h;
  for (int b = -4; b <= 4; ++b) h.buckets[b] = 0;
  for (std::size_t k = 0; k < dependent.size(); ++k) {
    auto it = free_by_id.find(dependent.item_ids[k]);
    if (it == free_by_id.end()) {
      throw InvalidArgument("diff_histogram: item '" + dependent.item_ids[k] +
                            "' missing from the context-free run");
    }
    ++h.buckets[dependent.scores[k] - it->second];
  }
  return h;
}

bool pair_accurate(PairKind kind, double s1, double s2) {
  const double a = s1 - 2.5;
  const double b = s2 - 2.5;
  if (kind == PairKind::kSemanticallySimilar) return (a > 0 && b > 0) || (a < 0 && b < 0);
  return a * b < 0;
}

PairAccuracy logical_consistency(const PairFile& pairs, const ScoringTrajectory& traj) {
  traj.validate();
  std::unordered_map<std::string, int> by_id;
  for (std::size_t k = 0; k < traj.size(); ++k) by_id.emplace(traj.item_ids[k], traj.scores[k]);
  PairAccuracy acc;
  acc.kind = pairs.kind;
  for (const auto& [a, b] : pairs.pairs) {
    auto ia = by_id.find(a);
    auto ib = by_id.find(b);
    if (ia == by_id.end() || ib == by_id.end()) {
      throw InvalidArgument("logical_consistency: item '" + (ia == by_id.end() ? a : b) +
                            "' not in trajectory");
    }
    ++acc.total;
    if (pair_accurate(pairs.kind, ia->second, ib->second)) ++acc.accurate;
  }
  return acc;
}

std::array<std::size_t, 5> option_counts(const Transcript& t) {
  std::array<std::size_t, 5> counts{};
  for (const auto& e : t.entries) {
    if (e.semantic_index) ++counts[*e.semantic_index];
  }
  return counts;
}

}  // namespace cape
