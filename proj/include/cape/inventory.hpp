#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace cape {

inline constexpr int kInventorySchemaVersion = 1;

// Big Five dimensions in canonical O, C, E, A, N order.
enum class Trait { kO = 0, kC = 1, kE = 2, kA = 3, kN = 4 };

inline constexpr std::array<Trait, 5> kAllTraits = {Trait::kO, Trait::kC, Trait::kE,
                                                    Trait::kA, Trait::kN};

char trait_letter(Trait t);
std::optional<Trait> trait_from_letter(std::string_view s);

// Keying sign: +1 when agreement raises the trait score.
enum class Key { kPositive = 1, kNegative = -1 };

struct InventoryItem {
  std::string id;
  // Statement without the leading "You", e.g. "worry about things".
  std::string text;
  Trait trait = Trait::kO;
  Key key = Key::kPositive;

  bool operator==(const InventoryItem&) const = default;
};

class Inventory {
 public:
  Inventory(std::string name, std::vector<InventoryItem> items);

  const std::string& name() const { return name_; }
  const std::vector<InventoryItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  const InventoryItem& at(std::string_view id) const;
  const InventoryItem* find(std::string_view id) const;
  // Position of the item in canonical (file) order.
  std::size_t index_of(std::string_view id) const;

  nlohmann::json to_json() const;

 private:
  std::string name_;
  std::vector<InventoryItem> items_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct ParaphraseSet {
  std::string inventory_name;
  std::map<std::string, std::vector<std::string>> variants;

  // Text for `id` under paraphrase `variant` (0 = original text).
  std::string text_for(const InventoryItem& item, int variant) const;
};

enum class PairKind { kSemanticallySimilar, kLogicallyInconsistent };

std::string_view pair_kind_name(PairKind k);

struct PairFile {
  PairKind kind = PairKind::kSemanticallySimilar;
  std::vector<std::pair<std::string, std::string>> pairs;
};

Inventory parse_inventory(const nlohmann::json& doc);
Inventory load_inventory(const std::filesystem::path& path);

ParaphraseSet parse_paraphrases(const nlohmann::json& doc, const Inventory& inv);
ParaphraseSet load_paraphrases(const std::filesystem::path& path, const Inventory& inv);

PairFile parse_pairs(const nlohmann::json& doc, const Inventory& inv);
PairFile load_pairs(const std::filesystem::path& path, const Inventory& inv);
nlohmann::json pairs_to_json(const PairFile& pairs);

std::map<Trait, std::size_t> items_per_trait(const Inventory& inv);

// Reads a whole file as JSON, raising IoError / SchemaError.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace cape
