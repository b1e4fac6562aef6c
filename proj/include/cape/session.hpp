#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cape/backend.hpp"
#include "cape/inventory.hpp"
#include "cape/prompt.hpp"

namespace cape {

struct HistoryMode {
  enum class Kind { kContextFree, kContextDependent, kFewShot };

  Kind kind = Kind::kContextFree;
  int k = 0;  // few-shot window, >= 1

  static HistoryMode context_free() { return {Kind::kContextFree, 0}; }
  static HistoryMode context_dependent() { return {Kind::kContextDependent, 0}; }
  static HistoryMode few_shot(int k) { return {Kind::kFewShot, k}; }

  // "context-free", "context-dependent", "few-shot:K"
  static HistoryMode parse(std::string_view text);
  std::string to_string() const;
  bool operator==(const HistoryMode&) const = default;
};

struct Ordering {
  enum class Kind { kCanonical, kRandom, kTraitGrouped, kCyclicRotation };

  Kind kind = Kind::kCanonical;
  std::uint64_t seed = 0;

  // "canonical", "random:SEED", "trait-grouped", "cyclic-rotation"
  static Ordering parse(std::string_view text);
  std::string to_string() const;
};

struct SessionConfig {
  std::shared_ptr<const Inventory> inventory;
  PromptVariant variant;
  std::shared_ptr<ChatBackend> backend;
  HistoryMode history;
  Ordering ordering;
  // Forced semantic option written into every prior assistant turn.
  std::optional<int> adversarial;
  std::optional<std::string> persona;
  GenerationParams params;
  std::string run_id;

  // Item text variant: 0 = original, k = k-th paraphrase from `paraphrases`.
  std::shared_ptr<const ParaphraseSet> paraphrases;
  int paraphrase_index = 0;

  // Provenance labels for reports.
  std::string factor;
  std::string level;

  // Zero timestamps so that outputs are byte-reproducible.
  bool deterministic = false;
  // When set, the transcript is written to <out_dir>/<run_id>.jsonl.
  std::optional<std::filesystem::path> out_dir;

  void validate() const;
  nlohmann::json snapshot() const;
};

struct TranscriptEntry {
  int presentation_index = 0;  // 1-based
  std::string item_id;
  std::string prompt_text;
  std::string raw_reply;
  std::optional<int> semantic_index;
  std::optional<std::string> presented_label;
  std::optional<int> score;
  // First reply when a re-ask was needed.
  std::optional<std::string> first_reply;
};

struct Transcript {
  std::string run_id;
  nlohmann::json config;  // snapshot, including the presentation order
  std::vector<TranscriptEntry> entries;
  bool invalid = false;
  std::string error;
  std::string started_at;
  std::string finished_at;
  std::int64_t duration_ms = 0;

  std::string to_jsonl() const;
  static Transcript from_jsonl(std::string_view text);
  static Transcript read(const std::filesystem::path& path);
  // Write via a temporary file and rename.
  void write_atomic(const std::filesystem::path& path) const;

  std::vector<std::string> item_order() const;
};

std::vector<std::string> order_items(const Inventory& inv, const Ordering& ordering);

// Messages sent for the question `current_prompt`, given the entries already
// answered in this session.
std::vector<ChatMessage> build_history(std::span<const TranscriptEntry> prior,
                                       const std::string& current_prompt,
                                       const SessionConfig& config);

Transcript run_session(const SessionConfig& config);

struct BatchOptions {
  int runs_per_config = 3;
  int jobs = 1;
  std::uint64_t master_seed = 0;
  // Called on every expanded run config (run id and seed already set) before
  // it is scheduled, e.g. to wrap its backend in a recorder.
  std::function<void(SessionConfig&)> prepare;
};

// Each config runs `runs_per_config` times as "<run_id>-r<k>". A run without
// an explicit params.seed gets one derived from (master_seed, run_id).
std::vector<Transcript> run_batch(std::span<const SessionConfig> configs, const BatchOptions& options);

// All *.jsonl transcripts in a directory, sorted by file name.
std::vector<Transcript> read_transcripts(const std::filesystem::path& dir);

}  // namespace cape
