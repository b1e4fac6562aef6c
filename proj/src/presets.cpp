#include "cape/presets.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "cape/error.hpp"
#include "cape/prompt.hpp"

namespace cape {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 6> kFactorPresets = {
    "stability", "temperature", "option-wording", "option-order", "instruction", "item-paraphrasing"};

PresetLevel variant_level(std::string level, std::string variant) {
  PresetLevel l;
  l.level = std::move(level);
  l.variant_id = std::move(variant);
  return l;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    if (!ok) c = '-';
  }
  return s;
}

}  // namespace

json PresetLevel::to_json() const {
  json j = {{"level", level}, {"runs", runs}};
  if (variant_id) j["variant"] = *variant_id;
  if (temperature) j["temperature"] = *temperature;
  if (paraphrase_index) j["paraphrase_index"] = *paraphrase_index;
  if (history) j["history_mode"] = history->to_string();
  if (ordering) j["ordering"] = ordering->to_string();
  if (adversarial) j["adversarial"] = *adversarial;
  return j;
}

std::size_t ExperimentPreset::total_runs() const {
  std::size_t n = 0;
  for (const auto& l : levels) n += static_cast<std::size_t>(l.runs);
  return n;
}

json ExperimentPreset::to_json() const {
  json levels_json = json::array();
  for (const auto& l : levels) levels_json.push_back(l.to_json());
  return {{"name", name}, {"preset_version", version}, {"levels", levels_json}};
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "stability", "temperature",     "option-wording", "option-order", "instruction",         "item-paraphrasing",
      "fewshot-ablation", "adversarial", "ordering",    "alignment",    "logical-consistency"};
  return names;
}

bool is_factor_preset(std::string_view name) {
  return name != "stability" && std::find(kFactorPresets.begin(), kFactorPresets.end(), name) != kFactorPresets.end();
}

ExperimentPreset expand_preset(std::string_view name, const PresetOptions& options) {
  if (options.runs < 1) throw InvalidArgument("preset: runs must be >= 1");
  ExperimentPreset p;
  p.name = std::string(name);
  if (name == "stability") {
    auto l = variant_level("default", "default");
    l.runs = options.runs;
    p.levels.push_back(l);
  } else if (name == "temperature") {
    for (double t : {0.5, 1.0, 1.5}) {
      auto l = variant_level(t == 1.0 ? "1" : (t == 0.5 ? "0.5" : "1.5"), "default");
      l.temperature = t;
      p.levels.push_back(l);
    }
  } else if (name == "option-wording") {
    for (const char* v : {"wording-1", "wording-2", "wording-3"}) p.levels.push_back(variant_level(v, v));
  } else if (name == "option-order") {
    for (const char* v : {"order-1", "order-2", "order-3"}) p.levels.push_back(variant_level(v, v));
  } else if (name == "instruction") {
    for (const char* v : {"instruction-1", "instruction-2", "instruction-3"}) p.levels.push_back(variant_level(v, v));
  } else if (name == "item-paraphrasing") {
    for (int k = 0; k < 3; ++k) {
      auto l = variant_level(k == 0 ? "original" : "paraphrase-" + std::to_string(k), "default");
      l.paraphrase_index = k;
      p.levels.push_back(l);
    }
  } else if (name == "fewshot-ablation") {
    if (options.fewshot.empty()) throw InvalidArgument("preset: fewshot-ablation needs at least one window size");
    for (int k : options.fewshot) {
      PresetLevel l;
      l.history = HistoryMode::few_shot(k);
      l.level = l.history->to_string();
      l.runs = options.runs;
      p.levels.push_back(l);
    }
    PresetLevel full;
    full.history = HistoryMode::context_dependent();
    full.level = full.history->to_string();
    full.runs = options.runs;
    p.levels.push_back(full);
  } else if (name == "adversarial") {
    if (options.force_option < 0 || options.force_option >= kNumOptions) {
      throw InvalidArgument("preset: forced option out of range");
    }
    PresetLevel before;
    before.level = "baseline";
    before.history = HistoryMode::context_dependent();
    before.runs = options.runs;
    PresetLevel after = before;
    after.level = "forced-" + std::to_string(options.force_option);
    after.adversarial = options.force_option;
    p.levels = {before, after};
  } else if (name == "ordering") {
    const std::array<Ordering, 3> orders = {Ordering{Ordering::Kind::kRandom, options.ordering_seed},
                                            Ordering{Ordering::Kind::kTraitGrouped, 0},
                                            Ordering{Ordering::Kind::kCyclicRotation, 0}};
    for (const auto& o : orders) {
      PresetLevel l;
      l.ordering = o;
      l.level = o.to_string();
      l.history = HistoryMode::context_dependent();
      l.runs = options.runs;
      p.levels.push_back(l);
    }
  } else if (name == "alignment" || name == "logical-consistency") {
    PresetLevel l;
    l.level = "default";
    l.runs = options.runs;
    p.levels.push_back(l);
  } else {
    throw InvalidArgument("unknown preset '" + std::string(name) + "'");
  }
  return p;
}

std::vector<SessionConfig> apply_preset(const ExperimentPreset& preset, const SessionConfig& base,
                                        const VariantBundle& variants) {
  std::vector<SessionConfig> out;
  for (const auto& l : preset.levels) {
    SessionConfig c = base;
    c.factor = preset.name;
    c.level = l.level;
    if (l.variant_id) c.variant = variants.get(*l.variant_id);
    if (l.temperature) c.params.temperature = *l.temperature;
    if (l.paraphrase_index) {
      if (*l.paraphrase_index > 0 && !c.paraphrases) {
        throw InvalidArgument("preset " + preset.name + " needs a paraphrase file");
      }
      c.paraphrase_index = *l.paraphrase_index;
    }
    if (l.history) c.history = *l.history;
    if (l.ordering) c.ordering = *l.ordering;
    if (l.adversarial) c.adversarial = *l.adversarial;
    c.run_id = preset.name + "-" + l.level;
    if (!l.history) c.run_id += "-" + c.history.to_string();
    c.run_id = sanitize(c.run_id);
    out.push_back(std::move(c));
  }
  return out;
}

std::string report_group(const json& config) {
  const std::string factor = config.value("factor", std::string{});
  const std::string history = config.value("history_mode", std::string{});
  if (is_factor_preset(factor)) return factor + "|" + history;
  return factor + "|" + history + "|" + config.value("level", std::string{});
}

}  // namespace cape
