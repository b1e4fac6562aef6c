#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "cape/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"

namespace cape {

namespace {

using nlohmann::json;

std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    auto dot = dotted.find('.', start);
    if (dot == std::string::npos) dot = dotted.size();
    parts.push_back(dotted.substr(start, dot - start));
    start = dot + 1;
  }
  return parts;
}

void set_path(json& body, const std::string& dotted, json value) {
  if (dotted.empty()) return;
  json* node = &body;
  auto parts = split_path(dotted);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = std::move(value);
}

const json* get_path(const json& body, const std::string& dotted) {
  const json* node = &body;
  for (const auto& part : split_path(dotted)) {
    if (node->is_array()) {
      char* end = nullptr;
      auto idx = std::strtoul(part.c_str(), &end, 10);
      if (end == part.c_str() || *end != '\0' || idx >= node->size()) return nullptr;
      node = &(*node)[idx];
    } else if (node->is_object() && node->contains(part)) {
      node = &(*node)[part];
    } else {
      return nullptr;
    }
  }
  return node;
}

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

}  // namespace

ExponentialBackoff::ExponentialBackoff(std::chrono::milliseconds initial,
                                       std::chrono::milliseconds max, std::uint64_t seed)
    : initial_(initial), max_(max), rng_(seed) {}

std::chrono::milliseconds ExponentialBackoff::ceiling(int attempt) const {
  // Saturate before shifting overflows.
  if (attempt >= 30) return max_;
  auto scaled = initial_ * (std::int64_t{1} << attempt);
  return std::min(scaled, max_);
}

std::chrono::milliseconds ExponentialBackoff::next_delay(int attempt) {
  const auto cap = ceiling(attempt).count();
  std::lock_guard lock(mu_);
  std::uniform_int_distribution<std::int64_t> dist(0, std::max<std::int64_t>(cap, 0));
  return std::chrono::milliseconds(dist(rng_));
}

ProviderConfig ProviderConfig::from_json(const json& j) {
  ProviderConfig c;
  c.name = j.value("name", c.name);
  c.base_url = j.value("base_url", c.base_url);
  c.path = j.value("path", c.path);
  c.model = j.value("model", c.model);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.auth_header = j.value("auth_header", c.auth_header);
  c.auth_scheme = j.value("auth_scheme", c.auth_scheme);
  if (j.contains("extra_headers")) c.extra_headers = j["extra_headers"].get<std::map<std::string, std::string>>();
  if (j.contains("role_names")) {
    for (const auto& [k, v] : j["role_names"].items()) c.role_names[k] = v.get<std::string>();
  }
  c.temperature_field = j.value("temperature_field", c.temperature_field);
  c.max_tokens_field = j.value("max_tokens_field", c.max_tokens_field);
  c.seed_field = j.value("seed_field", c.seed_field);
  c.reply_path = j.value("reply_path", c.reply_path);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.max_attempts = j.value("max_attempts", c.max_attempts);
  c.initial_backoff_ms = j.value("initial_backoff_ms", c.initial_backoff_ms);
  c.max_backoff_ms = j.value("max_backoff_ms", c.max_backoff_ms);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.min_interval_ms = j.value("min_interval_ms", c.min_interval_ms);
  if (c.model.empty()) throw SchemaError("provider config: 'model' is required");
  if (c.base_url.empty()) throw SchemaError("provider config: 'base_url' is required");
  if (c.max_attempts < 1 || c.max_in_flight < 1) {
    throw SchemaError("provider config: max_attempts and max_in_flight must be >= 1");
  }
  return c;
}

ProviderConfig ProviderConfig::load(const std::filesystem::path& path) {
  try {
    return from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

HttpChatBackend::HttpChatBackend(ProviderConfig config)
    : config_(std::move(config)),
      backoff_(std::chrono::milliseconds(config_.initial_backoff_ms),
               std::chrono::milliseconds(config_.max_backoff_ms)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      in_flight_(config_.max_in_flight) {
  if (config_.model.empty()) throw InvalidArgument("http-chat backend requires a model");
}

HttpChatBackend::~HttpChatBackend() = default;

json HttpChatBackend::build_request(std::span<const ChatMessage> messages,
                                    const GenerationParams& params) const {
  json msgs = json::array();
  for (const auto& m : messages) {
    auto role = config_.role_names.at(std::string(role_name(m.role)));
    msgs.push_back({{"role", role}, {"content", m.content}});
  }
  json body = {{"model", config_.model}, {"messages", msgs}};
  set_path(body, config_.temperature_field, params.temperature);
  set_path(body, config_.max_tokens_field, params.max_tokens);
  if (params.seed) set_path(body, config_.seed_field, *params.seed);
  return body;
}

std::uint64_t HttpChatBackend::request_count() const {
  std::lock_guard lock(mu_);
  return requests_;
}

void HttpChatBackend::pace() {
  std::chrono::milliseconds wait{0};
  {
    std::lock_guard lock(mu_);
    ++requests_;
    const auto now = std::chrono::steady_clock::now();
    const auto earliest = last_start_ + std::chrono::milliseconds(config_.min_interval_ms);
    if (config_.min_interval_ms > 0 && now < earliest) {
      wait = std::chrono::duration_cast<std::chrono::milliseconds>(earliest - now);
      last_start_ = earliest;
    } else {
      last_start_ = now;
    }
  }
  if (wait.count() > 0) sleeper_(wait);
}

HttpResponse HttpChatBackend::post(const std::string& body, const std::string& credential) {
  httplib::Client client(config_.base_url);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!credential.empty()) {
    headers.emplace(config_.auth_header,
                    config_.auth_scheme.empty() ? credential : config_.auth_scheme + " " + credential);
  }
  for (const auto& [k, v] : config_.extra_headers) headers.emplace(k, v);
  auto res = client.Post(config_.path, headers, body, "application/json");
  if (!res) return {0, {}, httplib::to_string(res.error())};
  return {res->status, res->body, {}};
}

ChatReply HttpChatBackend::complete(std::span<const ChatMessage> messages,
                                    const GenerationParams& params) {
  if (messages.empty() || messages.back().role != Role::kUser) {
    throw InvalidArgument("chat: last message must have role user");
  }
  params.validate();
  std::string credential;
  if (!config_.api_key_env.empty()) {
    const char* env = std::getenv(config_.api_key_env.c_str());
    if (!env || !*env) {
      throw BackendError(BackendError::Kind::kAuth,
                         "credential variable " + config_.api_key_env + " is not set");
    }
    credential = env;
  }
  const json request = build_request(messages, params);
  const std::string body = request.dump();

  HttpResponse last;
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    if (attempt > 0) sleeper_(backoff_.next_delay(attempt - 1));
    pace();
    in_flight_.acquire();
    try {
      last = post(body, credential);
    } catch (...) {
      in_flight_.release();
      throw;
    }
    in_flight_.release();

    if (last.status == 401 || last.status == 403) {
      throw BackendError(BackendError::Kind::kAuth,
                         "http " + std::to_string(last.status) + ": " + last.body);
    }
    if (last.status >= 200 && last.status < 300) {
      json parsed;
      try {
        parsed = json::parse(last.body);
      } catch (const json::parse_error& e) {
        throw BackendError(BackendError::Kind::kMalformedResponse, e.what());
      }
      const json* reply = get_path(parsed, config_.reply_path);
      if (!reply || !reply->is_string()) {
        throw BackendError(BackendError::Kind::kMalformedResponse,
                           "no string at '" + config_.reply_path + "' in response");
      }
      return {reply->get<std::string>(), request};
    }
    if (!retryable(last.status)) {
      throw BackendError(BackendError::Kind::kTransport,
                         "http " + std::to_string(last.status) + ": " + last.body);
    }
  }
  if (last.status == 429) {
    throw BackendError(BackendError::Kind::kRateLimitExhausted,
                       "rate limited after " + std::to_string(config_.max_attempts) + " attempts");
  }
  throw BackendError(BackendError::Kind::kTransport,
                     "gave up after " + std::to_string(config_.max_attempts) + " attempts: " +
                         (last.status == 0 ? last.error : "http " + std::to_string(last.status)));
}

}  // namespace cape
