#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cape/session.hpp"

namespace cape {

inline constexpr int kPresetVersion = 1;

// One level of an experiment: the settings that differ from the base config,
// and how many independent runs use them.
struct PresetLevel {
  std::string level;
  std::optional<std::string> variant_id;
  std::optional<double> temperature;
  std::optional<int> paraphrase_index;
  std::optional<HistoryMode> history;
  std::optional<Ordering> ordering;
  std::optional<int> adversarial;
  int runs = 1;

  nlohmann::json to_json() const;
};

struct ExperimentPreset {
  std::string name;
  int version = kPresetVersion;
  std::vector<PresetLevel> levels;

  std::size_t total_runs() const;
  nlohmann::json to_json() const;
};

struct PresetOptions {
  int runs = 3;                           // replicate runs for non-factor presets
  std::vector<int> fewshot = {1, 5, 10, 20};
  int force_option = 2;                   // semantic index for the adversarial preset
  std::uint64_t ordering_seed = 0;
};

const std::vector<std::string>& preset_names();

// Presets whose runs differ by level on purpose, so a consistency report
// spans all of their levels rather than one level's replicates.
bool is_factor_preset(std::string_view name);

ExperimentPreset expand_preset(std::string_view name, const PresetOptions& options = {});

// One SessionConfig per level with factor, level, run id and level deltas
// applied to `base`. Pair each config with levels[i].runs.
std::vector<SessionConfig> apply_preset(const ExperimentPreset& preset, const SessionConfig& base,
                                        const VariantBundle& variants);

// Key that groups transcripts into one consistency report.
std::string report_group(const nlohmann::json& config_snapshot);

}  // namespace cape
