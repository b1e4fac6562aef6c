#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "cape/error.hpp"
#include "cape/inventory.hpp"

namespace cape {

enum class Role { kSystem, kUser, kAssistant };

std::string_view role_name(Role r);

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct GenerationParams {
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  int max_tokens = 16;

  void validate() const;
  nlohmann::json to_json() const;
  static GenerationParams from_json(const nlohmann::json& j);
};

class BackendError : public Error {
 public:
  enum class Kind { kAuth, kRateLimitExhausted, kTransport, kMalformedResponse, kCassetteMiss };

  BackendError(Kind kind, const std::string& message);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ChatReply {
  std::string text;
  // Exact request body sent over the wire; null for in-process backends.
  nlohmann::json wire_request;
};

// One chat-model endpoint. Implementations must be safe to call from several
// sessions at once; a single session calls sequentially.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  virtual ChatReply complete(std::span<const ChatMessage> messages,
                             const GenerationParams& params) = 0;
  virtual std::string model_id() const = 0;
  // Stable descriptor recorded in transcripts, e.g. "constant:A".
  virtual std::string describe() const = 0;

  std::string chat(std::span<const ChatMessage> messages, const GenerationParams& params);
};

// Canonical request used for cassette hashing and logging.
nlohmann::json canonical_request(std::string_view model, std::span<const ChatMessage> messages,
                                 const GenerationParams& params);
// Hex SHA-256 of the canonical request.
std::string request_hash(std::string_view model, std::span<const ChatMessage> messages,
                         const GenerationParams& params);

// Answers every call with the same text.
class ConstantBackend final : public ChatBackend {
 public:
  explicit ConstantBackend(std::string reply);
  ChatReply complete(std::span<const ChatMessage> messages, const GenerationParams& params) override;
  std::string model_id() const override { return "scripted-constant"; }
  std::string describe() const override { return "constant:" + reply_; }

 private:
  std::string reply_;
};

// Answers with the modal option letter of prior assistant turns; the
// fallback letter is used when there is no history (or no letter in it).
class HistoryMajorityBackend final : public ChatBackend {
 public:
  explicit HistoryMajorityBackend(std::string fallback = "A", std::string labels = "ABCDE");
  ChatReply complete(std::span<const ChatMessage> messages, const GenerationParams& params) override;
  std::string model_id() const override { return "scripted-history-majority"; }
  std::string describe() const override { return "history-majority:" + fallback_; }

 private:
  std::string fallback_;
  std::string labels_;
};

struct NoisyTableConfig {
  // Item text -> base semantic index (0..4).
  std::vector<std::pair<std::string, int>> table;
  double flip_probability = 0.0;
  std::uint64_t seed = 0;
  std::string labels = "ABCDE";
};

// Looks up the item quoted in the last user message, answers its base option
// and, with probability p, moves to an adjacent option. Deterministic in
// (messages, params.seed, seed).
class NoisyTableBackend final : public ChatBackend {
 public:
  explicit NoisyTableBackend(NoisyTableConfig config);
  // Base table drawn uniformly from `seed` for every inventory item.
  static NoisyTableConfig random_table(const Inventory& inv, double p, std::uint64_t seed);

  ChatReply complete(std::span<const ChatMessage> messages, const GenerationParams& params) override;
  std::string model_id() const override { return "scripted-noisy-table"; }
  std::string describe() const override;

 private:
  NoisyTableConfig config_;
};

struct CassetteEntry {
  std::string hash;
  nlohmann::json request;
  std::string response;
  std::string timestamp;
};

// Thread-safe JSONL appender.
class CassetteWriter {
 public:
  explicit CassetteWriter(std::filesystem::path path, bool deterministic = false);
  void append(const std::string& hash, const nlohmann::json& request, const std::string& response);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  bool deterministic_;
  std::mutex mu_;
};

std::vector<CassetteEntry> read_cassette(const std::filesystem::path& path);

// Resolves calls from recorded cassettes; a miss is an error.
class ReplayBackend final : public ChatBackend {
 public:
  // `source` is a cassette file or a directory of *.cassette.jsonl files.
  explicit ReplayBackend(const std::filesystem::path& source, std::string model = {});
  ChatReply complete(std::span<const ChatMessage> messages, const GenerationParams& params) override;
  std::string model_id() const override { return model_; }
  std::string describe() const override { return "replay"; }
  std::size_t size() const { return responses_.size(); }

 private:
  std::string model_;
  std::unordered_map<std::string, std::string> responses_;
};

// Forwards to another backend and appends every exchange to a cassette.
class RecordingBackend final : public ChatBackend {
 public:
  RecordingBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<CassetteWriter> writer);
  ChatReply complete(std::span<const ChatMessage> messages, const GenerationParams& params) override;
  std::string model_id() const override { return inner_->model_id(); }
  std::string describe() const override { return inner_->describe(); }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::shared_ptr<CassetteWriter> writer_;
};

struct BackendSpec {
  enum class Kind { kHttpChat, kConstant, kHistoryMajority, kNoisyTable, kReplay };

  Kind kind = Kind::kConstant;
  // constant: reply text; history-majority: fallback letter.
  std::string option = "A";
  // noisy-table
  double flip_probability = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> table_path;
  // replay cassette, or http-chat provider config
  std::filesystem::path path;
  // http-chat endpoint/model overrides
  std::string endpoint;
  std::string model;

  void validate() const;
};

// Parses "constant:A", "history-majority:C", "noisy-table:p=0.1,seed=42[,table=F]",
// "replay:PATH" and "http:PROVIDER.json[,model=M][,endpoint=URL]".
BackendSpec parse_backend_spec(std::string_view text);

// Replay mode spec for a recorded cassette.
BackendSpec record_replay(const std::filesystem::path& cassette);

// `inv` is needed by noisy-table to identify items in prompts.
std::shared_ptr<ChatBackend> make_backend(const BackendSpec& spec, const Inventory* inv = nullptr);

}  // namespace cape
