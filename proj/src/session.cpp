#include "cape/session.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "cape/hash.hpp"
#include "cape/scoring.hpp"

namespace cape {

namespace {

using nlohmann::json;
using Clock = std::chrono::system_clock;

constexpr const char* kEpoch = "1970-01-01T00:00:00Z";

std::string iso_time(Clock::time_point tp) {
  auto t = Clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Uniform integer in [0, n) by rejection, independent of <random> distributions.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

json opt_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }
json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

Transcript failed_run(const SessionConfig& config, const std::string& why) {
  Transcript t;
  t.run_id = config.run_id;
  t.config = json::object();
  t.config["run_id"] = config.run_id;
  t.invalid = true;
  t.error = why;
  t.started_at = t.finished_at = kEpoch;
  return t;
}

}  // namespace

HistoryMode HistoryMode::parse(std::string_view text) {
  if (text == "context-free") return context_free();
  if (text == "context-dependent") return context_dependent();
  constexpr std::string_view kPrefix = "few-shot:";
  if (text.starts_with(kPrefix)) {
    int k = 0;
    auto digits = text.substr(kPrefix.size());
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc{} && p == digits.data() + digits.size() && k >= 1) return few_shot(k);
  }
  throw InvalidArgument("unknown history mode '" + std::string(text) +
                        "' (expected context-free, context-dependent or few-shot:K)");
}

std::string HistoryMode::to_string() const {
  switch (kind) {
    case Kind::kContextFree: return "context-free";
    case Kind::kContextDependent: return "context-dependent";
    case Kind::kFewShot: return "few-shot:" + std::to_string(k);
  }
  return "context-free";
}

Ordering Ordering::parse(std::string_view text) {
  if (text == "canonical") return {Kind::kCanonical, 0};
  if (text == "trait-grouped") return {Kind::kTraitGrouped, 0};
  if (text == "cyclic-rotation") return {Kind::kCyclicRotation, 0};
  if (text == "random") return {Kind::kRandom, 0};
  constexpr std::string_view kPrefix = "random:";
  if (text.starts_with(kPrefix)) {
    std::uint64_t seed = 0;
    auto digits = text.substr(kPrefix.size());
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
    if (ec == std::errc{} && p == digits.data() + digits.size()) return {Kind::kRandom, seed};
  }
  throw InvalidArgument("unknown ordering '" + std::string(text) +
                        "' (expected canonical, random:SEED, trait-grouped or cyclic-rotation)");
}

std::string Ordering::to_string() const {
  switch (kind) {
    case Kind::kCanonical: return "canonical";
    case Kind::kRandom: return "random:" + std::to_string(seed);
    case Kind::kTraitGrouped: return "trait-grouped";
    case Kind::kCyclicRotation: return "cyclic-rotation";
  }
  return "canonical";
}

void SessionConfig::validate() const {
  if (!inventory) throw InvalidArgument("session: no inventory");
  if (!backend) throw InvalidArgument("session: no backend");
  if (run_id.empty()) throw InvalidArgument("session: empty run_id");
  if (history.kind == HistoryMode::Kind::kFewShot && history.k < 1) {
    throw InvalidArgument("session: few-shot window must be >= 1");
  }
  if (adversarial && (*adversarial < 0 || *adversarial >= kNumOptions)) {
    throw InvalidArgument("session: adversarial option must be a semantic index in [0, 4]");
  }
  if (paraphrase_index < 0 || (paraphrase_index > 0 && !paraphrases)) {
    throw InvalidArgument("session: paraphrase index set without a paraphrase file");
  }
  variant.validate();
  params.validate();
}

json SessionConfig::snapshot() const {
  return {{"run_id", run_id},
          {"inventory", inventory ? inventory->name() : ""},
          {"variant", variant.variant_id},
          {"backend", backend ? backend->describe() : ""},
          {"model", backend ? backend->model_id() : ""},
          {"history_mode", history.to_string()},
          {"ordering", ordering.to_string()},
          {"adversarial", opt_json(adversarial)},
          {"persona", opt_json(persona)},
          {"params", params.to_json()},
          {"paraphrase_index", paraphrase_index},
          {"factor", factor},
          {"level", level}};
}

std::vector<std::string> Transcript::item_order() const {
  std::vector<std::string> ids;
  ids.reserve(entries.size());
  for (const auto& e : entries) ids.push_back(e.item_id);
  return ids;
}

std::string Transcript::to_jsonl() const {
  json head = config;
  head["type"] = "config";
  head["run_id"] = run_id;
  head["invalid"] = invalid;
  head["error"] = error.empty() ? json(nullptr) : json(error);
  head["timing"] = {{"started_at", started_at}, {"finished_at", finished_at}, {"duration_ms", duration_ms}};
  std::string out = head.dump() + "\n";
  for (const auto& e : entries) {
    json line = {{"type", "entry"},
                 {"presentation_index", e.presentation_index},
                 {"item_id", e.item_id},
                 {"prompt", e.prompt_text},
                 {"reply", e.raw_reply},
                 {"semantic_index", opt_json(e.semantic_index)},
                 {"label", opt_json(e.presented_label)},
                 {"score", opt_json(e.score)}};
    if (e.first_reply) line["first_reply"] = *e.first_reply;
    out += line.dump();
    out += '\n';
  }
  return out;
}

Transcript Transcript::from_jsonl(std::string_view text) {
  Transcript t;
  std::istringstream in{std::string(text)};
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (first) {
      if (j.value("type", "") != "config") throw SchemaError("transcript: first line must be the config");
      t.run_id = j.at("run_id").get<std::string>();
      t.invalid = j.value("invalid", false);
      if (j.contains("error") && j["error"].is_string()) t.error = j["error"].get<std::string>();
      if (j.contains("timing")) {
        t.started_at = j["timing"].value("started_at", "");
        t.finished_at = j["timing"].value("finished_at", "");
        t.duration_ms = j["timing"].value("duration_ms", std::int64_t{0});
      }
      for (const char* k : {"type", "invalid", "error", "timing"}) j.erase(k);
      t.config = std::move(j);
      first = false;
      continue;
    }
    TranscriptEntry e;
    e.presentation_index = j.at("presentation_index").get<int>();
    e.item_id = j.at("item_id").get<std::string>();
    e.prompt_text = j.value("prompt", "");
    e.raw_reply = j.value("reply", "");
    if (!j["semantic_index"].is_null()) e.semantic_index = j["semantic_index"].get<int>();
    if (j.contains("label") && !j["label"].is_null()) e.presented_label = j["label"].get<std::string>();
    if (!j["score"].is_null()) e.score = j["score"].get<int>();
    if (j.contains("first_reply")) e.first_reply = j["first_reply"].get<std::string>();
    t.entries.push_back(std::move(e));
  }
  if (first) throw SchemaError("transcript: empty file");
  for (std::size_t k = 0; k < t.entries.size(); ++k) {
    if (t.entries[k].presentation_index != static_cast<int>(k) + 1) {
      throw SchemaError("transcript '" + t.run_id + "': presentation_index gap at entry " +
                        std::to_string(k + 1));
    }
  }
  return t;
}

Transcript Transcript::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open transcript " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  try {
    return from_jsonl(os.str());
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void Transcript::write_atomic(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << to_jsonl();
    if (!out.flush()) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> order_items(const Inventory& inv, const Ordering& ordering) {
  const auto& items = inv.items();
  std::vector<std::string> ids;
  ids.reserve(items.size());
  switch (ordering.kind) {
    case Ordering::Kind::kCanonical:
      for (const auto& it : items) ids.push_back(it.id);
      break;
    case Ordering::Kind::kRandom: {
      for (const auto& it : items) ids.push_back(it.id);
      std::mt19937_64 rng(ordering.seed);
      for (std::size_t i = ids.size(); i > 1; --i) {
        std::swap(ids[i - 1], ids[bounded(rng, i)]);
      }
      break;
    }
    case Ordering::Kind::kTraitGrouped:
      for (Trait t : kAllTraits) {
        for (const auto& it : items) {
          if (it.trait == t) ids.push_back(it.id);
        }
      }
      break;
    case Ordering::Kind::kCyclicRotation: {
      std::array<std::vector<std::string>, 5> queues;
      for (const auto& it : items) queues[static_cast<int>(it.trait)].push_back(it.id);
      std::array<std::size_t, 5> next{};
      while (ids.size() < items.size()) {
        for (int t = 0; t < 5; ++t) {
          if (next[t] < queues[t].size()) ids.push_back(queues[t][next[t]++]);
        }
      }
      break;
    }
  }
  return ids;
}

std::vector<ChatMessage> build_history(std::span<const TranscriptEntry> prior,
                                       const std::string& current_prompt,
                                       const SessionConfig& config) {
  std::vector<ChatMessage> msgs;
  if (config.persona && !config.persona->empty()) msgs.push_back({Role::kSystem, *config.persona});

  std::size_t keep = 0;
  switch (config.history.kind) {
    case HistoryMode::Kind::kContextFree: keep = 0; break;
    case HistoryMode::Kind::kContextDependent: keep = prior.size(); break;
    case HistoryMode::Kind::kFewShot:
      keep = std::min<std::size_t>(static_cast<std::size_t>(config.history.k), prior.size());
      break;
  }
  const std::string forced =
      config.adversarial ? config.variant.option_text(*config.adversarial) : std::string();
  for (const auto& e : prior.subspan(prior.size() - keep)) {
    msgs.push_back({Role::kUser, e.prompt_text});
    msgs.push_back({Role::kAssistant, config.adversarial ? forced : e.raw_reply});
  }
  msgs.push_back({Role::kUser, current_prompt});
  return msgs;
}

Transcript run_session(const SessionConfig& config) {
  config.validate();
  const auto start = Clock::now();
  const auto& inv = *config.inventory;

  Transcript t;
  t.run_id = config.run_id;
  t.config = config.snapshot();
  const auto order = order_items(inv, config.ordering);
  t.config["order"] = order;

  try {
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& item = inv.at(order[k]);
      const std::string text =
          config.paraphrases ? config.paraphrases->text_for(item, config.paraphrase_index) : item.text;

      TranscriptEntry entry;
      entry.presentation_index = static_cast<int>(k) + 1;
      entry.item_id = item.id;
      entry.prompt_text = render_prompt(text, config.variant);

      auto msgs = build_history(t.entries, entry.prompt_text, config);
      entry.raw_reply = config.backend->chat(msgs, config.params);
      std::optional<ParsedChoice> choice;
      try {
        choice = parse_choice(entry.raw_reply, config.variant);
      } catch (const ChoiceParseError&) {
        msgs.back().content = entry.prompt_text + "\n\n" + std::string(kReaskSuffix);
        entry.first_reply = entry.raw_reply;
        entry.raw_reply = config.backend->chat(msgs, config.params);
        try {
          choice = parse_choice(entry.raw_reply, config.variant);
        } catch (const ChoiceParseError& e) {
          t.invalid = true;
          if (t.error.empty()) t.error = "unparseable reply for item '" + item.id + "': " + e.what();
        }
      }
      if (choice) {
        entry.semantic_index = choice->semantic_index;
        entry.presented_label = choice->presented_label;
        entry.score = score_response(item, *choice);
      }
      t.entries.push_back(std::move(entry));
    }
  } catch (const BackendError& e) {
    t.invalid = true;
    t.error = e.code() + ": " + e.what();
  }

  const auto end = Clock::now();
  if (config.deterministic) {
    t.started_at = t.finished_at = kEpoch;
    t.duration_ms = 0;
  } else {
    t.started_at = iso_time(start);
    t.finished_at = iso_time(end);
    t.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
  }
  if (config.out_dir) t.write_atomic(*config.out_dir / (config.run_id + ".jsonl"));
  return t;
}

std::vector<Transcript> run_batch(std::span<const SessionConfig> configs, const BatchOptions& options) {
  if (options.runs_per_config < 1) throw InvalidArgument("run_batch: runs_per_config must be >= 1");
  std::vector<SessionConfig> runs;
  for (const auto& base : configs) {
    for (int r = 1; r <= options.runs_per_config; ++r) {
      SessionConfig c = base;
      c.run_id = base.run_id + "-r" + std::to_string(r);
      if (!c.params.seed) {
        c.params.seed = static_cast<std::int64_t>(derive_seed(options.master_seed, c.run_id) >> 1);
      }
      if (options.prepare) options.prepare(c);
      runs.push_back(std::move(c));
    }
  }

  std::vector<Transcript> out(runs.size());
  auto run_one = [&](std::size_t i) {
    try {
      out[i] = run_session(runs[i]);
    } catch (const std::exception& e) {
      out[i] = failed_run(runs[i], e.what());
      if (runs[i].out_dir) out[i].write_atomic(*runs[i].out_dir / (runs[i].run_id + ".jsonl"));
    }
  };

  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(runs.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < runs.size(); ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < runs.size(); i = next++) run_one(i);
    });
  }
  workers.clear();
  return out;
}

std::vector<Transcript> read_transcripts(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.ends_with(".jsonl") && !name.ends_with(".cassette.jsonl")) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<Transcript> out;
  for (const auto& f : files) out.push_back(Transcript::read(f));
  return out;
}

}  // namespace cape
