#include "cape/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace cape {

namespace detail {
extern const char* const kBuiltinVariantsJson;
}

namespace {

using nlohmann::json;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::size_t count_of(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view kStrip = " \t\r\n\"'`.!*";
  auto b = s.find_first_not_of(kStrip);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(kStrip);
  return s.substr(b, e - b + 1);
}

std::string replace_once(std::string text, std::string_view placeholder, std::string_view value) {
  auto pos = text.find(placeholder);
  text.replace(pos, placeholder.size(), value);
  return text;
}

// Semantic indices whose label appears as "(X)" or as a standalone capital.
std::set<int> letter_matches(std::string_view reply, const OptionSet& opts) {
  std::set<int> found;
  for (int s = 0; s < kNumOptions; ++s) {
    const std::string& label = opts.labels[s];
    const char up = label[0];
    const char lo = static_cast<char>(std::tolower(static_cast<unsigned char>(up)));
    for (std::size_t i = 0; i < reply.size(); ++i) {
      const char c = reply[i];
      if (c != up && c != lo) continue;
      const bool prev_word = i > 0 && is_word_char(reply[i - 1]);
      const bool next_word = i + 1 < reply.size() && is_word_char(reply[i + 1]);
      if (prev_word || next_word) continue;
      const bool parenthesised = i > 0 && reply[i - 1] == '(' && i + 1 < reply.size() &&
                                 reply[i + 1] == ')';
      if (c == up || parenthesised) {
        found.insert(s);
        break;
      }
    }
  }
  return found;
}

OptionStyle parse_style(const std::string& s) {
  if (s == "enumerated") return OptionStyle::kEnumerated;
  if (s == "inline") return OptionStyle::kInline;
  throw SchemaError("variants: unknown option_style '" + s + "'");
}

}  // namespace

void OptionSet::validate() const {
  std::set<std::string> seen_labels, seen_words;
  for (int s = 0; s < kNumOptions; ++s) {
    const auto& l = labels[s];
    if (l.size() != 1 || !std::isupper(static_cast<unsigned char>(l[0]))) {
      throw SchemaError("option label '" + l + "' must be a single capital letter");
    }
    if (!seen_labels.insert(l).second) throw SchemaError("duplicate option label '" + l + "'");
    if (wordings[s].empty()) throw SchemaError("empty option wording");
    if (!seen_words.insert(lower(wordings[s])).second) {
      throw SchemaError("duplicate option wording '" + wordings[s] + "'");
    }
  }
  std::array<int, kNumOptions> sorted = presentation_order;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < kNumOptions; ++i) {
    if (sorted[i] != i) throw SchemaError("presentation_order is not a permutation of 0..4");
  }
}

void PromptVariant::validate() const {
  if (count_of(instruction_template, "{item}") != 1 ||
      count_of(instruction_template, "{options}") != 1) {
    throw SchemaError("variant '" + variant_id +
                      "': template must contain {item} and {options} exactly once");
  }
  options.validate();
}

const std::string& PromptVariant::label_of(int semantic_index) const {
  if (semantic_index < 0 || semantic_index >= kNumOptions) {
    throw InvalidArgument("semantic index out of range: " + std::to_string(semantic_index));
  }
  return options.labels[semantic_index];
}

std::string PromptVariant::option_text(int semantic_index) const {
  const auto& label = label_of(semantic_index);
  const auto& wording = options.wordings[semantic_index];
  if (style == OptionStyle::kEnumerated) return "(" + label + ") " + wording;
  return label + ") " + wording;
}

ChoiceParseError::ChoiceParseError(Kind kind, std::string raw_text)
    : Error(kind == Kind::kNoChoice ? "no_choice" : "ambiguous_choice",
            std::string(kind == Kind::kNoChoice ? "no option found in reply: "
                                                : "reply matches several options: ") +
                raw_text),
      kind_(kind),
      raw_text_(std::move(raw_text)) {}

std::string render_options(const PromptVariant& variant) {
  std::string out;
  const char* sep = variant.style == OptionStyle::kEnumerated ? "\n" : ", ";
  for (int pos = 0; pos < kNumOptions; ++pos) {
    if (pos > 0) out += sep;
    out += variant.option_text(variant.options.presentation_order[pos]);
  }
  return out;
}

std::string render_prompt(std::string_view item_text, const PromptVariant& variant) {
  std::string text = replace_once(variant.instruction_template, "{item}", item_text);
  return replace_once(std::move(text), "{options}", render_options(variant));
}

std::string render_prompt(const InventoryItem& item, const PromptVariant& variant) {
  return render_prompt(item.text, variant);
}

ParsedChoice parse_choice(std::string_view reply, const PromptVariant& variant) {
  const auto& opts = variant.options;
  auto make = [&](int s) {
    return ParsedChoice{s, opts.labels[s], std::string(reply)};
  };

  auto letters = letter_matches(reply, opts);
  if (letters.size() == 1) return make(*letters.begin());
  if (letters.size() > 1) {
    throw ChoiceParseError(ChoiceParseError::Kind::kAmbiguousChoice, std::string(reply));
  }

  const std::string body = lower(trim(reply));
  for (int s = 0; s < kNumOptions; ++s) {
    if (body == lower(opts.wordings[s])) return make(s);
  }

  std::vector<int> hits;
  for (int s = 0; s < kNumOptions; ++s) {
    if (body.find(lower(opts.wordings[s])) != std::string::npos) hits.push_back(s);
  }
  // "strongly disagree" also contains "agree"; keep only maximal wordings.
  std::vector<int> maximal;
  for (int s : hits) {
    const auto ws = lower(opts.wordings[s]);
    bool covered = std::any_of(hits.begin(), hits.end(), [&](int o) {
      const auto wo = lower(opts.wordings[o]);
      return o != s && wo.size() > ws.size() && wo.find(ws) != std::string::npos;
    });
    if (!covered) maximal.push_back(s);
  }
  if (maximal.size() == 1) return make(maximal.front());
  throw ChoiceParseError(maximal.empty() ? ChoiceParseError::Kind::kNoChoice
                                         : ChoiceParseError::Kind::kAmbiguousChoice,
                         std::string(reply));
}

PromptVariant default_variant() { return VariantBundle::builtin().get("default"); }

VariantBundle VariantBundle::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("variants: top-level value must be an object");
  if (doc.value("schema_version", kInventorySchemaVersion) != kInventorySchemaVersion) {
    throw SchemaError("variants: unsupported schema_version");
  }
  VariantBundle bundle;
  const json empty = json::object();
  const auto& instructions = doc.contains("instructions") ? doc["instructions"] : empty;
  const auto& wordings = doc.contains("wordings") ? doc["wordings"] : empty;
  const auto& orders = doc.contains("orders") ? doc["orders"] : empty;
  if (!doc.contains("variants") || !doc["variants"].is_array()) {
    throw SchemaError("variants: missing array field 'variants'");
  }
  auto lookup = [](const json& table, const std::string& key, std::string_view what) -> const json& {
    if (!table.contains(key)) {
      throw SchemaError("variants: unknown " + std::string(what) + " '" + key + "'");
    }
    return table[key];
  };
  for (const auto& v : doc["variants"]) {
    PromptVariant pv;
    pv.variant_id = v.at("id").get<std::string>();
    const auto& instr = lookup(instructions, v.at("instruction").get<std::string>(), "instruction");
    pv.instruction_template = instr.at("template").get<std::string>();
    pv.style = parse_style(instr.value("option_style", "enumerated"));
    const auto& words = lookup(wordings, v.at("wording").get<std::string>(), "wording");
    if (!words.is_array() || words.size() != kNumOptions) {
      throw SchemaError("variants: wording sets need exactly 5 entries");
    }
    for (int s = 0; s < kNumOptions; ++s) pv.options.wordings[s] = words[s].get<std::string>();
    if (v.contains("order")) {
      const auto& order = lookup(orders, v["order"].get<std::string>(), "order");
      if (!order.is_array() || order.size() != kNumOptions) {
        throw SchemaError("variants: orders need exactly 5 entries");
      }
      for (int i = 0; i < kNumOptions; ++i) pv.options.presentation_order[i] = order[i].get<int>();
    }
    if (v.contains("labels")) {
      const auto& labels = v["labels"];
      if (!labels.is_array() || labels.size() != kNumOptions) {
        throw SchemaError("variants: labels need exactly 5 entries");
      }
      for (int s = 0; s < kNumOptions; ++s) pv.options.labels[s] = labels[s].get<std::string>();
    }
    pv.validate();
    if (bundle.variants_.count(pv.variant_id)) {
      throw SchemaError("variants: duplicate variant id '" + pv.variant_id + "'");
    }
    bundle.order_.push_back(pv.variant_id);
    bundle.variants_.emplace(pv.variant_id, std::move(pv));
  }
  return bundle;
}

VariantBundle VariantBundle::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

const VariantBundle& VariantBundle::builtin() {
  static const VariantBundle bundle = from_json(json::parse(detail::kBuiltinVariantsJson));
  return bundle;
}

const PromptVariant& VariantBundle::get(std::string_view id) const {
  auto it = variants_.find(id);
  if (it == variants_.end()) throw InvalidArgument("unknown variant '" + std::string(id) + "'");
  return it->second;
}

bool VariantBundle::contains(std::string_view id) const { return variants_.find(id) != variants_.end(); }

std::vector<std::string> VariantBundle::ids() const { return order_; }

}  // namespace cape
