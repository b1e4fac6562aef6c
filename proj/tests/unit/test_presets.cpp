#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "cape/backend.hpp"
#include "cape/presets.hpp"

namespace fs = std::filesystem;
using namespace cape;

namespace {

const fs::path kData = CAPE_DATA_DIR;

SessionConfig base() {
  SessionConfig c;
  c.inventory = std::make_shared<const Inventory>(load_inventory(kData / "inventories/toy_10.json"));
  c.variant = default_variant();
  c.backend = std::make_shared<ConstantBackend>("A");
  return c;
}

TEST(Presets, EveryNamedPresetExpands) {
  EXPECT_EQ(preset_names().size(), 11u);
  for (const auto& name : preset_names()) {
    const auto p = expand_preset(name);
    EXPECT_EQ(p.name, name);
    EXPECT_EQ(p.version, kPresetVersion);
    EXPECT_GE(p.total_runs(), 1u) << name;
  }
  EXPECT_THROW(expand_preset("vibes"), InvalidArgument);
}

TEST(Presets, SixFactorPresetsHaveThreeRuns) {
  for (const char* name : {"stability", "temperature", "option-wording", "option-order", "instruction",
                           "item-paraphrasing"}) {
    EXPECT_EQ(expand_preset(name).total_runs(), 3u) << name;
  }
  const auto stability = expand_preset("stability");
  ASSERT_EQ(stability.levels.size(), 1u);
  EXPECT_EQ(stability.levels[0].runs, 3);
  EXPECT_FALSE(is_factor_preset("stability"));
  EXPECT_TRUE(is_factor_preset("temperature"));
}

TEST(Presets, TemperatureLevelsShareVariant) {
  const auto p = expand_preset("temperature");
  ASSERT_EQ(p.levels.size(), 3u);
  EXPECT_EQ(*p.levels[0].temperature, 0.5);
  EXPECT_EQ(*p.levels[1].temperature, 1.0);
  EXPECT_EQ(*p.levels[2].temperature, 1.5);
  for (const auto& l : p.levels) EXPECT_EQ(*l.variant_id, "default");
}

TEST(Presets, OptionOrderUsesThreePermutations) {
  const auto p = expand_preset("option-order");
  std::vector<std::string> ids;
  for (const auto& l : p.levels) ids.push_back(*l.variant_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"order-1", "order-2", "order-3"}));
}

TEST(Presets, AblationAdversarialAndOrderingLevels) {
  PresetOptions opts;
  opts.fewshot = {2, 7};
  opts.runs = 2;
  const auto ablate = expand_preset("fewshot-ablation", opts);
  ASSERT_EQ(ablate.levels.size(), 3u);
  EXPECT_EQ(ablate.levels[0].history, HistoryMode::few_shot(2));
  EXPECT_EQ(ablate.levels[2].history, HistoryMode::context_dependent());
  EXPECT_EQ(ablate.total_runs(), 6u);

  opts.force_option = 4;
  const auto adv = expand_preset("adversarial", opts);
  ASSERT_EQ(adv.levels.size(), 2u);
  EXPECT_FALSE(adv.levels[0].adversarial.has_value());
  EXPECT_EQ(adv.levels[1].adversarial, 4);
  EXPECT_EQ(adv.levels[1].level, "forced-4");

  const auto ord = expand_preset("ordering", opts);
  EXPECT_EQ(ord.levels.size(), 3u);
}

TEST(Presets, ApplySetsFactorLevelAndRunIds) {
  const auto configs = apply_preset(expand_preset("option-wording"), base(), VariantBundle::builtin());
  ASSERT_EQ(configs.size(), 3u);
  std::set<std::string> ids;
  for (const auto& c : configs) {
    EXPECT_EQ(c.factor, "option-wording");
    EXPECT_EQ(c.variant.variant_id, c.level);
    ids.insert(c.run_id);
  }
  EXPECT_EQ(ids.size(), 3u);
  EXPECT_EQ(configs[0].run_id, "option-wording-wording-1-context-free");
}

TEST(Presets, ParaphraseLevelsNeedAParaphraseFile) {
  EXPECT_THROW(apply_preset(expand_preset("item-paraphrasing"), base(), VariantBundle::builtin()), InvalidArgument);
  auto b = base();
  b.paraphrases = std::make_shared<const ParaphraseSet>(
      load_paraphrases(kData / "paraphrases/toy_10_paraphrases.json", *b.inventory));
  const auto configs = apply_preset(expand_preset("item-paraphrasing"), b, VariantBundle::builtin());
  EXPECT_EQ(configs[2].paraphrase_index, 2);
}

TEST(Presets, ReportGroupingSpansFactorLevels) {
  nlohmann::json a = {{"factor", "temperature"}, {"history_mode", "context-free"}, {"level", "0.5"}};
  nlohmann::json b = {{"factor", "temperature"}, {"history_mode", "context-free"}, {"level", "1.5"}};
  EXPECT_EQ(report_group(a), report_group(b));
  nlohmann::json c = {{"factor", "fewshot-ablation"}, {"history_mode", "few-shot:5"}, {"level", "few-shot:5"}};
  nlohmann::json d = {{"factor", "fewshot-ablation"}, {"history_mode", "few-shot:10"}, {"level", "few-shot:10"}};
  EXPECT_NE(report_group(c), report_group(d));
}

TEST(Presets, ExpansionIsPureAndVersioned) {
  EXPECT_EQ(expand_preset("ordering").to_json(), expand_preset("ordering").to_json());
  EXPECT_EQ(expand_preset("stability").to_json()["preset_version"], kPresetVersion);
}

}  // namespace
