#include "cape/inventory.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cape/error.hpp"

namespace cape {

namespace {

using nlohmann::json;

// Line (1-based) of the first occurrence of `"needle"` in `raw`, or 0.
std::size_t line_of(std::string_view raw, std::string_view needle) {
  if (raw.empty() || needle.empty()) return 0;
  std::string quoted = "\"" + std::string(needle) + "\"";
  auto pos = raw.find(quoted);
  if (pos == std::string_view::npos) return 0;
  std::size_t line = 1;
  for (std::size_t i = 0; i < pos; ++i) {
    if (raw[i] == '\n') ++line;
  }
  return line;
}

std::string where(std::size_t row, std::string_view id, std::string_view raw) {
  std::ostringstream os;
  os << "item #" << row + 1;
  if (!id.empty()) os << " (id '" << id << "')";
  if (auto line = line_of(raw, id); line > 0) os << " at line " << line;
  return os.str();
}

void check_schema_version(const json& doc, std::string_view what) {
  if (!doc.is_object()) {
    throw SchemaError(std::string(what) + ": top-level value must be an object");
  }
  if (auto it = doc.find("schema_version"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<int>() != kInventorySchemaVersion) {
      throw SchemaError(std::string(what) + ": unsupported schema_version " + it->dump());
    }
  }
}

Inventory parse_inventory_impl(const json& doc, std::string_view raw) {
  check_schema_version(doc, "inventory");
  if (!doc.contains("name") || !doc["name"].is_string()) {
    throw SchemaError("inventory: missing string field 'name'");
  }
  if (!doc.contains("items") || !doc["items"].is_array()) {
    throw SchemaError("inventory: missing array field 'items'");
  }
  const auto& rows = doc["items"];
  if (rows.empty()) throw SchemaError("inventory: no items");

  std::vector<InventoryItem> items;
  items.reserve(rows.size());
  for (std::size_t row = 0; row < rows.size(); ++row) {
    const auto& r = rows[row];
    std::string id = r.contains("id") && r["id"].is_string() ? r["id"].get<std::string>() : "";
    if (id.empty()) throw SchemaError("inventory: " + where(row, id, raw) + ": missing id");
    if (!r.contains("text") || !r["text"].is_string() || r["text"].get<std::string>().empty()) {
      throw SchemaError("inventory: " + where(row, id, raw) + ": missing or empty text");
    }
    std::optional<Trait> trait;
    if (r.contains("trait") && r["trait"].is_string()) {
      trait = trait_from_letter(r["trait"].get<std::string>());
    }
    if (!trait) {
      throw SchemaError("inventory: " + where(row, id, raw) + ": unknown trait label " +
                        (r.contains("trait") ? r["trait"].dump() : std::string("<missing>")));
    }
    if (!r.contains("key") || !r["key"].is_number_integer() ||
        (r["key"].get<int>() != 1 && r["key"].get<int>() != -1)) {
      throw SchemaError("inventory: " + where(row, id, raw) + ": unknown key sign " +
                        (r.contains("key") ? r["key"].dump() : std::string("<missing>")));
    }
    items.push_back({std::move(id), r["text"].get<std::string>(), *trait,
                     r["key"].get<int>() == 1 ? Key::kPositive : Key::kNegative});
  }

  std::set<std::string_view> seen;
  for (std::size_t row = 0; row < items.size(); ++row) {
    if (!seen.insert(items[row].id).second) {
      throw SchemaError("inventory: " + where(row, items[row].id, raw) + ": duplicate id");
    }
  }
  return Inventory(doc["name"].get<std::string>(), std::move(items));
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json parse_text(const std::string& text, const std::filesystem::path& path) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw SchemaError(path.string() + ": empty file");
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace

char trait_letter(Trait t) { return "OCEAN"[static_cast<int>(t)]; }

std::optional<Trait> trait_from_letter(std::string_view s) {
  if (s.size() != 1) return std::nullopt;
  switch (s[0]) {
    case 'O': return Trait::kO;
    case 'C': return Trait::kC;
    case 'E': return Trait::kE;
    case 'A': return Trait::kA;
    case 'N': return Trait::kN;
    default: return std::nullopt;
  }
}

Inventory::Inventory(std::string name, std::vector<InventoryItem> items)
    : name_(std::move(name)), items_(std::move(items)) {
  if (items_.empty()) throw SchemaError("inventory '" + name_ + "' has no items");
  std::array<std::size_t, 5> counts{};
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& item = items_[i];
    if (item.id.empty()) throw SchemaError("inventory: item #" + std::to_string(i + 1) + " has empty id");
    if (item.text.empty()) throw SchemaError("inventory: item '" + item.id + "' has empty text");
    if (!index_.emplace(item.id, i).second) {
      throw SchemaError("inventory: duplicate id '" + item.id + "'");
    }
    ++counts[static_cast<int>(item.trait)];
  }
  for (Trait t : kAllTraits) {
    if (counts[static_cast<int>(t)] == 0) {
      throw SchemaError("inventory '" + name_ + "' has no items for trait " +
                        std::string(1, trait_letter(t)));
    }
  }
}

const InventoryItem* Inventory::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

const InventoryItem& Inventory::at(std::string_view id) const {
  if (const auto* item = find(id)) return *item;
  throw InvalidArgument("unknown item id '" + std::string(id) + "'");
}

std::size_t Inventory::index_of(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw InvalidArgument("unknown item id '" + std::string(id) + "'");
  return it->second;
}

nlohmann::json Inventory::to_json() const {
  json items = json::array();
  for (const auto& item : items_) {
    items.push_back({{"id", item.id},
                     {"text", item.text},
                     {"trait", std::string(1, trait_letter(item.trait))},
                     {"key", static_cast<int>(item.key)}});
  }
  return {{"schema_version", kInventorySchemaVersion}, {"name", name_}, {"items", items}};
}

std::string ParaphraseSet::text_for(const InventoryItem& item, int variant) const {
  if (variant <= 0) return item.text;
  auto it = variants.find(item.id);
  if (it == variants.end() || static_cast<std::size_t>(variant) > it->second.size()) {
    throw InvalidArgument("no paraphrase #" + std::to_string(variant) + " for item '" +
                          item.id + "'");
  }
  return it->second[variant - 1];
}

std::string_view pair_kind_name(PairKind k) {
  return k == PairKind::kSemanticallySimilar ? "semantically-similar" : "logically-inconsistent";
}

Inventory parse_inventory(const nlohmann::json& doc) { return parse_inventory_impl(doc, {}); }

Inventory load_inventory(const std::filesystem::path& path) {
  std::string text = slurp(path);
  return parse_inventory_impl(parse_text(text, path), text);
}

ParaphraseSet parse_paraphrases(const nlohmann::json& doc, const Inventory& inv) {
  check_schema_version(doc, "paraphrases");
  if (!doc.contains("inventory") || !doc["inventory"].is_string()) {
    throw SchemaError("paraphrases: missing string field 'inventory'");
  }
  ParaphraseSet set;
  set.inventory_name = doc["inventory"].get<std::string>();
  if (set.inventory_name != inv.name()) {
    throw SchemaError("paraphrases: file targets inventory '" + set.inventory_name +
                      "' but '" + inv.name() + "' is loaded");
  }
  if (!doc.contains("variants") || !doc["variants"].is_object()) {
    throw SchemaError("paraphrases: missing object field 'variants'");
  }
  for (const auto& [id, texts] : doc["variants"].items()) {
    if (!inv.find(id)) throw SchemaError("paraphrases: unknown item id '" + id + "'");
    if (!texts.is_array() || texts.empty()) {
      throw SchemaError("paraphrases: item '" + id + "' needs at least one paraphrase");
    }
    auto& out = set.variants[id];
    for (const auto& t : texts) {
      if (!t.is_string() || t.get<std::string>().empty()) {
        throw SchemaError("paraphrases: item '" + id + "' has an empty paraphrase");
      }
      out.push_back(t.get<std::string>());
    }
  }
  return set;
}

ParaphraseSet load_paraphrases(const std::filesystem::path& path, const Inventory& inv) {
  return parse_paraphrases(read_json_file(path), inv);
}

PairFile parse_pairs(const nlohmann::json& doc, const Inventory& inv) {
  check_schema_version(doc, "pairs");
  PairFile out;
  std::string kind = doc.value("kind", "");
  if (kind == "semantically-similar") {
    out.kind = PairKind::kSemanticallySimilar;
  } else if (kind == "logically-inconsistent") {
    out.kind = PairKind::kLogicallyInconsistent;
  } else {
    throw SchemaError("pairs: unknown kind '" + kind + "'");
  }
  if (!doc.contains("pairs") || !doc["pairs"].is_array()) {
    throw SchemaError("pairs: missing array field 'pairs'");
  }
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t row = 0;
  for (const auto& p : doc["pairs"]) {
    ++row;
    if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string()) {
      throw SchemaError("pairs: row " + std::to_string(row) + " is not an [id, id] pair");
    }
    auto a = p[0].get<std::string>();
    auto b = p[1].get<std::string>();
    for (const auto& id : {a, b}) {
      if (!inv.find(id)) {
        throw SchemaError("pairs: row " + std::to_string(row) + ": unknown item id '" + id + "'");
      }
    }
    if (a == b) throw SchemaError("pairs: row " + std::to_string(row) + ": self-pair '" + a + "'");
    auto canon = a < b ? std::pair{a, b} : std::pair{b, a};
    if (!seen.insert(canon).second) {
      throw SchemaError("pairs: row " + std::to_string(row) + ": repeated pair (" + a + ", " + b + ")");
    }
    out.pairs.emplace_back(std::move(a), std::move(b));
  }
  return out;
}

PairFile load_pairs(const std::filesystem::path& path, const Inventory& inv) {
  return parse_pairs(read_json_file(path), inv);
}

nlohmann::json pairs_to_json(const PairFile& pairs) {
  json rows = json::array();
  for (const auto& [a, b] : pairs.pairs) rows.push_back({a, b});
  return {{"schema_version", kInventorySchemaVersion},
          {"kind", std::string(pair_kind_name(pairs.kind))},
          {"pairs", rows}};
}

std::map<Trait, std::size_t> items_per_trait(const Inventory& inv) {
  std::map<Trait, std::size_t> counts;
  for (Trait t : kAllTraits) counts[t] = 0;
  for (const auto& item : inv.items()) ++counts[item.trait];
  return counts;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  return parse_text(slurp(path), path);
}

}  // namespace cape
