#include "cape/backend.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <ctime>
#include <fstream>
#include <sstream>

#include "cape/hash.hpp"
#include "cape/http_backend.hpp"

namespace cape {

namespace {

using nlohmann::json;

std::string_view backend_error_code(BackendError::Kind k) {
  switch (k) {
    case BackendError::Kind::kAuth: return "auth";
    case BackendError::Kind::kRateLimitExhausted: return "rate_limit_exhausted";
    case BackendError::Kind::kTransport: return "transport";
    case BackendError::Kind::kMalformedResponse: return "malformed_response";
    case BackendError::Kind::kCassetteMiss: return "cassette_miss";
  }
  return "backend";
}

void check_messages(std::span<const ChatMessage> messages) {
  if (messages.empty()) throw InvalidArgument("chat: empty message list");
  if (messages.back().role != Role::kUser) {
    throw InvalidArgument("chat: last message must have role user");
  }
  for (const auto& m : messages) {
    if (m.role != Role::kSystem && m.content.empty()) {
      throw InvalidArgument("chat: user/assistant messages must be non-empty");
    }
  }
}

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf.data();
}

double unit_from(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// First option letter in an assistant turn: "(X)" or a standalone capital.
std::optional<char> leading_letter(std::string_view text, std::string_view labels) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (labels.find(c) == std::string_view::npos) continue;
    bool prev_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
    bool next_ok = i + 1 == text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 1]));
    if (prev_ok && next_ok) return c;
  }
  return std::nullopt;
}

std::map<std::string, std::string> parse_kv(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto part = text.substr(start, end - start);
    if (!part.empty()) {
      auto eq = part.find('=');
      if (eq == std::string_view::npos) {
        out[std::string(part)] = "";
      } else {
        out[std::string(part.substr(0, eq))] = std::string(part.substr(eq + 1));
      }
    }
    start = end + 1;
  }
  return out;
}

double to_double(const std::string& s, std::string_view what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("backend spec: bad " + std::string(what) + " '" + s + "'");
  }
}

std::uint64_t to_u64(const std::string& s, std::string_view what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw InvalidArgument("backend spec: bad " + std::string(what) + " '" + s + "'");
  }
  return v;
}

}  // namespace

std::string_view role_name(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

void GenerationParams::validate() const {
  if (!(temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
  if (max_tokens <= 0) throw InvalidArgument("max_tokens must be positive");
}

json GenerationParams::to_json() const {
  return {{"temperature", temperature},
          {"seed", seed ? json(*seed) : json(nullptr)},
          {"max_tokens", max_tokens}};
}

GenerationParams GenerationParams::from_json(const json& j) {
  GenerationParams p;
  p.temperature = j.value("temperature", 0.0);
  if (j.contains("seed") && !j["seed"].is_null()) p.seed = j["seed"].get<std::int64_t>();
  p.max_tokens = j.value("max_tokens", 16);
  p.validate();
  return p;
}

BackendError::BackendError(Kind kind, const std::string& message)
    : Error(std::string(backend_error_code(kind)), message), kind_(kind) {}

std::string ChatBackend::chat(std::span<const ChatMessage> messages, const GenerationParams& params) {
  return complete(messages, params).text;
}

json canonical_request(std::string_view model, std::span<const ChatMessage> messages,
                       const GenerationParams& params) {
  json msgs = json::array();
  for (const auto& m : messages) {
    msgs.push_back({{"role", std::string(role_name(m.role))}, {"content", m.content}});
  }
  return {{"model", std::string(model)}, {"messages", msgs}, {"params", params.to_json()}};
}

std::string request_hash(std::string_view model, std::span<const ChatMessage> messages,
                         const GenerationParams& params) {
  return sha256_hex(canonical_request(model, messages, params).dump());
}

ConstantBackend::ConstantBackend(std::string reply) : reply_(std::move(reply)) {
  if (reply_.empty()) throw InvalidArgument("constant backend needs a non-empty reply");
}

ChatReply ConstantBackend::complete(std::span<const ChatMessage> messages,
                                    const GenerationParams& params) {
  check_messages(messages);
  params.validate();
  return {reply_, nullptr};
}

HistoryMajorityBackend::HistoryMajorityBackend(std::string fallback, std::string labels)
    : fallback_(std::move(fallback)), labels_(std::move(labels)) {
  if (fallback_.empty()) throw InvalidArgument("history-majority needs a fallback option");
}

ChatReply HistoryMajorityBackend::complete(std::span<const ChatMessage> messages,
                                           const GenerationParams& params) {
  check_messages(messages);
  params.validate();
  std::map<char, int> counts;
  for (const auto& m : messages) {
    if (m.role != Role::kAssistant) continue;
    if (auto c = leading_letter(m.content, labels_)) ++counts[*c];
  }
  if (counts.empty()) return {fallback_, nullptr};
  // Ties resolve to the earliest label.
  auto best = std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return a.second < b.second;
  });
  return {std::string(1, best->first), nullptr};
}

NoisyTableBackend::NoisyTableBackend(NoisyTableConfig config) : config_(std::move(config)) {
  if (!(config_.flip_probability >= 0.0 && config_.flip_probability <= 1.0)) {
    throw InvalidArgument("noisy-table flip probability must lie in [0, 1]");
  }
  if (config_.labels.size() != 5) throw InvalidArgument("noisy-table needs 5 labels");
  for (const auto& [text, s] : config_.table) {
    if (s < 0 || s > 4) throw InvalidArgument("noisy-table base option out of range for '" + text + "'");
  }
  // Longest texts first so that the most specific item wins.
  std::stable_sort(config_.table.begin(), config_.table.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
}

NoisyTableConfig NoisyTableBackend::random_table(const Inventory& inv, double p, std::uint64_t seed) {
  NoisyTableConfig cfg;
  cfg.flip_probability = p;
  cfg.seed = seed;
  for (const auto& item : inv.items()) {
    cfg.table.emplace_back(item.text, static_cast<int>(derive_seed(seed, item.id) % 5));
  }
  return cfg;
}

ChatReply NoisyTableBackend::complete(std::span<const ChatMessage> messages,
                                      const GenerationParams& params) {
  check_messages(messages);
  params.validate();
  const std::string& question = messages.back().content;
  int base = -1;
  for (const auto& [text, s] : config_.table) {
    if (question.find(text) != std::string::npos) {
      base = s;
      break;
    }
  }
  if (base < 0) base = static_cast<int>(derive_seed(config_.seed, question) % 5);

  const std::uint64_t call_seed =
      derive_seed(config_.seed ^ mix64(static_cast<std::uint64_t>(params.seed.value_or(0))), question);
  int choice = base;
  if (unit_from(mix64(call_seed)) < config_.flip_probability) {
    bool up = (mix64(call_seed + 1) & 1) != 0;
    if (choice == 0) up = true;
    if (choice == 4) up = false;
    choice += up ? 1 : -1;
  }
  return {std::string(1, config_.labels[choice]), nullptr};
}

std::string NoisyTableBackend::describe() const {
  std::ostringstream os;
  os << "noisy-table:p=" << config_.flip_probability << ",seed=" << config_.seed;
  return os.str();
}

CassetteWriter::CassetteWriter(std::filesystem::path path, bool deterministic)
    : path_(std::move(path)), deterministic_(deterministic) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void CassetteWriter::append(const std::string& hash, const json& request, const std::string& response) {
  json line = {{"hash", hash},
               {"request", request},
               {"response", response},
               {"timestamp", deterministic_ ? std::string("1970-01-01T00:00:00Z") : utc_now()}};
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to cassette " + path_.string());
  out << line.dump() << '\n';
}

std::vector<CassetteEntry> read_cassette(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open cassette " + path.string());
  std::vector<CassetteEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      out.push_back({j.at("hash").get<std::string>(), j.at("request"),
                     j.at("response").get<std::string>(), j.value("timestamp", "")});
    } catch (const json::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& source, std::string model)
    : model_(std::move(model)) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(source)) {
    for (const auto& e : std::filesystem::directory_iterator(source)) {
      const auto name = e.path().filename().string();
      if (name.size() > 15 && name.ends_with(".cassette.jsonl")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(source);
  }
  if (files.empty()) throw IoError("no cassettes found under " + source.string());
  for (const auto& f : files) {
    for (auto& entry : read_cassette(f)) {
      if (model_.empty()) model_ = entry.request.value("model", "");
      responses_.emplace(entry.hash, std::move(entry.response));
    }
  }
}

ChatReply ReplayBackend::complete(std::span<const ChatMessage> messages,
                                  const GenerationParams& params) {
  check_messages(messages);
  const auto hash = request_hash(model_, messages, params);
  auto it = responses_.find(hash);
  if (it == responses_.end()) {
    throw BackendError(BackendError::Kind::kCassetteMiss, "cassette miss for request " + hash);
  }
  return {it->second, nullptr};
}

RecordingBackend::RecordingBackend(std::shared_ptr<ChatBackend> inner,
                                   std::shared_ptr<CassetteWriter> writer)
    : inner_(std::move(inner)), writer_(std::move(writer)) {}

ChatReply RecordingBackend::complete(std::span<const ChatMessage> messages,
                                     const GenerationParams& params) {
  auto reply = inner_->complete(messages, params);
  auto request = canonical_request(inner_->model_id(), messages, params);
  if (!reply.wire_request.is_null()) request["wire"] = reply.wire_request;
  writer_->append(request_hash(inner_->model_id(), messages, params), request, reply.text);
  return reply;
}

void BackendSpec::validate() const {
  switch (kind) {
    case Kind::kHttpChat:
      if (path.empty() && (endpoint.empty() || model.empty())) {
        throw InvalidArgument("http-chat backend requires a provider config or endpoint+model");
      }
      break;
    case Kind::kConstant:
    case Kind::kHistoryMajority:
      if (option.empty()) throw InvalidArgument("scripted backend requires an option");
      break;
    case Kind::kNoisyTable:
      if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
        throw InvalidArgument("noisy-table p must lie in [0, 1]");
      }
      break;
    case Kind::kReplay:
      if (path.empty()) throw InvalidArgument("replay backend requires a cassette path");
      break;
  }
}

BackendSpec parse_backend_spec(std::string_view text) {
  auto colon = text.find(':');
  std::string kind(text.substr(0, colon));
  std::string rest = colon == std::string_view::npos ? "" : std::string(text.substr(colon + 1));
  BackendSpec spec;
  if (kind == "constant") {
    spec.kind = BackendSpec::Kind::kConstant;
    spec.option = rest;
  } else if (kind == "history-majority") {
    spec.kind = BackendSpec::Kind::kHistoryMajority;
    spec.option = rest.empty() ? "A" : rest;
  } else if (kind == "noisy-table") {
    spec.kind = BackendSpec::Kind::kNoisyTable;
    for (const auto& [k, v] : parse_kv(rest)) {
      if (k == "p") {
        spec.flip_probability = to_double(v, "p");
      } else if (k == "seed") {
        spec.seed = to_u64(v, "seed");
      } else if (k == "table") {
        spec.table_path = v;
      } else {
        throw InvalidArgument("backend spec: unknown noisy-table key '" + k + "'");
      }
    }
  } else if (kind == "replay") {
    spec.kind = BackendSpec::Kind::kReplay;
    spec.path = rest;
  } else if (kind == "http" || kind == "http-chat") {
    spec.kind = BackendSpec::Kind::kHttpChat;
    auto kv = parse_kv(rest);
    for (const auto& [k, v] : kv) {
      if (v.empty()) {
        spec.path = k;
      } else if (k == "model") {
        spec.model = v;
      } else if (k == "endpoint") {
        spec.endpoint = v;
      } else {
        throw InvalidArgument("backend spec: unknown http key '" + k + "'");
      }
    }
  } else {
    throw InvalidArgument("unknown backend kind '" + kind + "'");
  }
  spec.validate();
  return spec;
}

BackendSpec record_replay(const std::filesystem::path& cassette) {
  if (!std::filesystem::exists(cassette)) {
    throw IoError("cassette not found: " + cassette.string());
  }
  BackendSpec spec;
  spec.kind = BackendSpec::Kind::kReplay;
  spec.path = cassette;
  return spec;
}

std::shared_ptr<ChatBackend> make_backend(const BackendSpec& spec, const Inventory* inv) {
  spec.validate();
  switch (spec.kind) {
    case BackendSpec::Kind::kConstant:
      return std::make_shared<ConstantBackend>(spec.option);
    case BackendSpec::Kind::kHistoryMajority:
      return std::make_shared<HistoryMajorityBackend>(spec.option);
    case BackendSpec::Kind::kNoisyTable: {
      if (!inv) throw InvalidArgument("noisy-table backend needs an inventory");
      NoisyTableConfig cfg = NoisyTableBackend::random_table(*inv, spec.flip_probability, spec.seed);
      if (spec.table_path) {
        // {item_id: semantic index} overrides the seeded base table.
        auto doc = read_json_file(*spec.table_path);
        cfg.table.clear();
        for (const auto& [id, s] : doc.items()) {
          cfg.table.emplace_back(inv->at(id).text, s.get<int>());
        }
      }
      return std::make_shared<NoisyTableBackend>(std::move(cfg));
    }
    case BackendSpec::Kind::kReplay:
      return std::make_shared<ReplayBackend>(spec.path, spec.model);
    case BackendSpec::Kind::kHttpChat: {
      ProviderConfig cfg = spec.path.empty() ? ProviderConfig{} : ProviderConfig::load(spec.path);
      if (!spec.endpoint.empty()) cfg.base_url = spec.endpoint;
      if (!spec.model.empty()) cfg.model = spec.model;
      return std::make_shared<HttpChatBackend>(std::move(cfg));
    }
  }
  throw InvalidArgument("unsupported backend kind");
}

}  // namespace cape
