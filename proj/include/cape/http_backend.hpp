#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <semaphore>
#include <string>

#include <nlohmann/json.hpp>

#include "cape/backend.hpp"

namespace cape {

// Exponential backoff with full jitter: the delay before retry n is uniform
// in [0, min(max, initial * 2^n)].
class ExponentialBackoff {
 public:
  ExponentialBackoff(std::chrono::milliseconds initial, std::chrono::milliseconds max,
                     std::uint64_t seed = 0);

  std::chrono::milliseconds ceiling(int attempt) const;
  std::chrono::milliseconds next_delay(int attempt);

 private:
  std::chrono::milliseconds initial_;
  std::chrono::milliseconds max_;
  std::mutex mu_;
  std::mt19937_64 rng_;
};

// Per-provider adapter for OpenAI-style chat-completions endpoints.
struct ProviderConfig {
  std::string name = "openai";
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::string auth_header = "Authorization";
  std::string auth_scheme = "Bearer";
  std::map<std::string, std::string> extra_headers;
  // Wire role names for system/user/assistant.
  std::map<std::string, std::string> role_names{
      {"system", "system"}, {"user", "user"}, {"assistant", "assistant"}};
  // Dotted paths into the request body; empty disables the field.
  std::string temperature_field = "temperature";
  std::string max_tokens_field = "max_tokens";
  std::string seed_field = "seed";
  // Dotted path of the reply text in the response body.
  std::string reply_path = "choices.0.message.content";
  int timeout_ms = 60000;
  int max_attempts = 5;
  int initial_backoff_ms = 500;
  int max_backoff_ms = 30000;
  int max_in_flight = 4;
  int min_interval_ms = 0;

  static ProviderConfig from_json(const nlohmann::json& j);
  static ProviderConfig load(const std::filesystem::path& path);
};

// Low-level transport hook so tests can observe raw calls.
struct HttpResponse {
  int status = 0;  // 0 = transport failure (timeout, refused)
  std::string body;
  std::string error;
};

class HttpChatBackend final : public ChatBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpChatBackend(ProviderConfig config);
  ~HttpChatBackend() override;

  ChatReply complete(std::span<const ChatMessage> messages, const GenerationParams& params) override;
  std::string model_id() const override { return config_.model; }
  std::string describe() const override { return "http:" + config_.name + "/" + config_.model; }

  // Request body for a call; exposed for tests.
  nlohmann::json build_request(std::span<const ChatMessage> messages,
                               const GenerationParams& params) const;
  // Replaces the real sleep (tests).
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }
  std::uint64_t request_count() const;

 private:
  HttpResponse post(const std::string& body, const std::string& credential);
  void pace();

  ProviderConfig config_;
  ExponentialBackoff backoff_;
  Sleeper sleeper_;
  std::counting_semaphore<> in_flight_;
  mutable std::mutex mu_;
  std::chrono::steady_clock::time_point last_start_{};
  std::uint64_t requests_ = 0;
};

}  // namespace cape
