#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "cape/error.hpp"
#include "cape/inventory.hpp"
#include "cape/prompt.hpp"

namespace cape {

struct Transcript;

class InvalidTranscript : public Error {
 public:
  explicit InvalidTranscript(const std::string& message) : Error("invalid_transcript", message) {}
};

// +key: 5 - s; -key: 1 + s, for semantic index s in [0, 4].
int score_response(const InventoryItem& item, int semantic_index);
int score_response(const InventoryItem& item, const ParsedChoice& choice);

// Scores in presentation order (position k holds the k-th asked item).
struct ScoringTrajectory {
  std::string run_id;
  std::vector<int> scores;
  std::vector<std::string> item_ids;

  std::size_t size() const { return scores.size(); }
  void validate() const;
};

ScoringTrajectory trajectory_from_transcript(const Transcript& t);

// Per-trait mean item score, indexed in O, C, E, A, N order.
struct OceanScore {
  std::array<double, 5> values{};

  double operator[](Trait t) const { return values[static_cast<int>(t)]; }
  double& operator[](Trait t) { return values[static_cast<int>(t)]; }
  bool operator==(const OceanScore&) const = default;
};

OceanScore ocean_score(const ScoringTrajectory& traj, const Inventory& inv);

// Counts of per-item score differences (dependent - free), buckets -4..+4.
struct DiffHistogram {
  std::map<int, std::size_t> buckets;

  std::size_t total() const;
};

// Items are matched by id, so the two runs may use different orders; both must
// cover the same item set.
DiffHistogram diff_histogram(const ScoringTrajectory& dependent, const ScoringTrajectory& free);

// Similar pairs agree when both keyed scores sit on the same side of 2.5;
// inconsistent pairs agree when they sit on opposite sides.
bool pair_accurate(PairKind kind, double s1, double s2);

struct PairAccuracy {
  PairKind kind = PairKind::kSemanticallySimilar;
  std::size_t accurate = 0;
  std::size_t total = 0;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(accurate) / total; }
};

PairAccuracy logical_consistency(const PairFile& pairs, const ScoringTrajectory& traj);

// How often each semantic option (0 = most agree) was chosen.
std::array<std::size_t, 5> option_counts(const Transcript& t);

}  // namespace cape
