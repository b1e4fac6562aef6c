#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cape/error.hpp"
#include "cape/inventory.hpp"

namespace cape {

inline constexpr int kNumOptions = 5;

// How the option list is spliced into the {options} placeholder.
enum class OptionStyle {
  kEnumerated,  // one "(A) Wording" per line
  kInline,      // "A) Wording, B) Wording, ..."
};

// Five Likert options. Index s is the semantic agreement level: 0 is the
// most-agree wording, 4 the most-disagree. labels[s] is the letter bound to
// wording s; presentation_order lists semantic indices in display order.
struct OptionSet {
  std::array<std::string, kNumOptions> labels{"A", "B", "C", "D", "E"};
  std::array<std::string, kNumOptions> wordings;
  std::array<int, kNumOptions> presentation_order{0, 1, 2, 3, 4};

  void validate() const;
};

struct PromptVariant {
  std::string variant_id;
  std::string instruction_template;  // contains {item} and {options} once each
  OptionStyle style = OptionStyle::kEnumerated;
  OptionSet options;

  void validate() const;
  // "(C) Neither Accurate Nor Inaccurate" / "C) Neutral" depending on style.
  std::string option_text(int semantic_index) const;
  const std::string& label_of(int semantic_index) const;
};

struct ParsedChoice {
  int semantic_index = 0;
  std::string presented_label;
  std::string raw_text;
};

class ChoiceParseError : public Error {
 public:
  enum class Kind { kNoChoice, kAmbiguousChoice };

  ChoiceParseError(Kind kind, std::string raw_text);

  Kind kind() const { return kind_; }
  const std::string& raw_text() const { return raw_text_; }

 private:
  Kind kind_;
  std::string raw_text_;
};

// Suffix appended to the question on the single re-ask after a parse failure.
inline constexpr std::string_view kReaskSuffix = "Answer with a single option letter.";

std::string render_options(const PromptVariant& variant);
std::string render_prompt(std::string_view item_text, const PromptVariant& variant);
std::string render_prompt(const InventoryItem& item, const PromptVariant& variant);

// Resolves a reply to a semantic index. Precedence: a label letter
// (standalone or parenthesised), then an exact wording, then a unique
// wording substring. Throws ChoiceParseError.
ParsedChoice parse_choice(std::string_view reply, const PromptVariant& variant);

// Base prompt with Very Accurate ... Very Inaccurate options in A-E order.
PromptVariant default_variant();

// Named variants composed from instruction / wording / order components.
class VariantBundle {
 public:
  static VariantBundle from_json(const nlohmann::json& doc);
  static VariantBundle load(const std::filesystem::path& path);
  // Bundle compiled from data/variants.json.
  static const VariantBundle& builtin();

  const PromptVariant& get(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, PromptVariant, std::less<>> variants_;
  std::vector<std::string> order_;
};

}  // namespace cape
