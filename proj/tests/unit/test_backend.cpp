#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "cape/backend.hpp"
#include "cape/inventory.hpp"
#include "cape/prompt.hpp"

namespace fs = std::filesystem;
using namespace cape;

namespace {

const fs::path kData = CAPE_DATA_DIR;

std::vector<ChatMessage> ask(const std::string& text) { return {{Role::kUser, text}}; }

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("cape_backend_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Params, JsonRoundTripAndValidation) {
  GenerationParams p;
  p.temperature = 0.7;
  p.seed = 42;
  p.max_tokens = 8;
  const auto back = GenerationParams::from_json(p.to_json());
  EXPECT_DOUBLE_EQ(back.temperature, 0.7);
  EXPECT_EQ(back.seed, 42);
  EXPECT_EQ(back.max_tokens, 8);
  p.temperature = -1;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p.temperature = 0;
  p.max_tokens = 0;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Scripted, ConstantAnswersEveryCall) {
  ConstantBackend b("A");
  for (int i = 0; i < 5; ++i) EXPECT_EQ(b.chat(ask("q" + std::to_string(i)), {}), "A");
  EXPECT_EQ(b.describe(), "constant:A");
}

TEST(Scripted, MessageListIsValidated) {
  ConstantBackend b("A");
  std::vector<ChatMessage> none;
  EXPECT_THROW(b.chat(none, {}), InvalidArgument);
  std::vector<ChatMessage> trailing_assistant{{Role::kUser, "q"}, {Role::kAssistant, "A"}};
  EXPECT_THROW(b.chat(trailing_assistant, {}), InvalidArgument);
  std::vector<ChatMessage> empty_user{{Role::kUser, ""}};
  EXPECT_THROW(b.chat(empty_user, {}), InvalidArgument);
}

TEST(Scripted, HistoryMajorityFollowsModalAnswer) {
  HistoryMajorityBackend b("C");
  EXPECT_EQ(b.chat(ask("first"), {}), "C");
  std::vector<ChatMessage> h{{Role::kUser, "1"}, {Role::kAssistant, "B"}, {Role::kUser, "2"},
                             {Role::kAssistant, "(D) Disagree"}, {Role::kUser, "3"}, {Role::kAssistant, "D"},
                             {Role::kUser, "4"}};
  EXPECT_EQ(b.chat(h, {}), "D");
  std::vector<ChatMessage> tie{{Role::kUser, "1"}, {Role::kAssistant, "E"}, {Role::kUser, "2"},
                               {Role::kAssistant, "B"}, {Role::kUser, "3"}};
  EXPECT_EQ(b.chat(tie, {}), "B");
}

TEST(Scripted, NoisyTableZeroNoiseReturnsBaseOption) {
  NoisyTableConfig cfg;
  cfg.table = {{"worry about things", 3}, {"make friends easily", 0}};
  NoisyTableBackend b(cfg);
  EXPECT_EQ(b.chat(ask("Statement: \"You worry about things.\""), {}), "D");
  EXPECT_EQ(b.chat(ask("'You make friends easily'"), {}), "A");
}

TEST(Scripted, NoisyTableFlipsToAdjacentOptionsAtRateP) {
  const auto inv = load_inventory(kData / "inventories/mpi_120.json");
  auto cfg = NoisyTableBackend::random_table(inv, 0.3, 9);
  std::map<std::string, int> base;
  for (const auto& [text, s] : cfg.table) base[text] = s;
  NoisyTableBackend b(cfg);
  const auto& v = default_variant();
  int flips = 0, total = 0;
  for (std::int64_t seed = 0; seed < 20; ++seed) {
    GenerationParams params;
    params.seed = seed;
    for (const auto& item : inv.items()) {
      const int s = parse_choice(b.chat(ask(render_prompt(item, v)), params), v).semantic_index;
      EXPECT_LE(std::abs(s - base[item.text]), 1);
      flips += s != base[item.text];
      ++total;
    }
  }
  const double rate = static_cast<double>(flips) / total;
  EXPECT_NEAR(rate, 0.3, 0.04);
}

TEST(Scripted, NoisyTableIsDeterministic) {
  const auto inv = load_inventory(kData / "inventories/toy_10.json");
  NoisyTableBackend a(NoisyTableBackend::random_table(inv, 0.5, 3));
  NoisyTableBackend b(NoisyTableBackend::random_table(inv, 0.5, 3));
  GenerationParams params;
  params.seed = 11;
  for (const auto& item : inv.items()) {
    const auto msgs = ask(render_prompt(item, default_variant()));
    EXPECT_EQ(a.chat(msgs, params), b.chat(msgs, params));
  }
}

TEST(Hashing, CanonicalRequestHashIsStableAndSensitive) {
  GenerationParams p;
  p.seed = 1;
  const auto m = ask("hello");
  const auto h = request_hash("m", m, p);
  EXPECT_EQ(h.size(), 64u);
  EXPECT_EQ(h, request_hash("m", m, p));
  EXPECT_NE(h, request_hash("m2", m, p));
  EXPECT_NE(h, request_hash("m", ask("hello!"), p));
  p.temperature = 0.5;
  EXPECT_NE(h, request_hash("m", m, p));
}

TEST(Cassette, RecordThenReplayReproducesReplies) {
  const auto dir = temp_dir("record");
  const auto path = dir / "run.cassette.jsonl";
  auto writer = std::make_shared<CassetteWriter>(path, true);
  RecordingBackend rec(std::make_shared<ConstantBackend>("B"), writer);
  GenerationParams p;
  p.seed = 5;
  EXPECT_EQ(rec.chat(ask("one"), p), "B");
  EXPECT_EQ(rec.chat(ask("two"), p), "B");

  const auto entries = read_cassette(path);
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].timestamp, "1970-01-01T00:00:00Z");
  EXPECT_EQ(entries[0].request["model"], "scripted-constant");

  ReplayBackend replay(dir);
  EXPECT_EQ(replay.size(), 2u);
  EXPECT_EQ(replay.model_id(), "scripted-constant");
  EXPECT_EQ(replay.chat(ask("two"), p), "B");
  try {
    replay.chat(ask("three"), p);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::kCassetteMiss);
    EXPECT_EQ(e.code(), "cassette_miss");
  }
}

TEST(Cassette, MalformedLineIsReported) {
  const auto dir = temp_dir("malformed");
  std::ofstream(dir / "bad.cassette.jsonl") << "{\"hash\": 1}\n";
  EXPECT_THROW(read_cassette(dir / "bad.cassette.jsonl"), SchemaError);
  EXPECT_THROW(ReplayBackend(temp_dir("empty")), IoError);
}

TEST(Spec, ParsesEveryBackendKind) {
  auto c = parse_backend_spec("constant:C");
  EXPECT_EQ(c.kind, BackendSpec::Kind::kConstant);
  EXPECT_EQ(c.option, "C");
  auto h = parse_backend_spec("history-majority:C");
  EXPECT_EQ(h.kind, BackendSpec::Kind::kHistoryMajority);
  auto n = parse_backend_spec("noisy-table:p=0.1,seed=42");
  EXPECT_EQ(n.kind, BackendSpec::Kind::kNoisyTable);
  EXPECT_DOUBLE_EQ(n.flip_probability, 0.1);
  EXPECT_EQ(n.seed, 42u);
  auto r = parse_backend_spec("replay:/tmp/x.cassette.jsonl");
  EXPECT_EQ(r.kind, BackendSpec::Kind::kReplay);
  auto w = parse_backend_spec("http:provider.json,model=gpt");
  EXPECT_EQ(w.kind, BackendSpec::Kind::kHttpChat);
  EXPECT_EQ(w.path, "provider.json");
  EXPECT_EQ(w.model, "gpt");
}

TEST(Spec, RejectsBadSpecs) {
  EXPECT_THROW(parse_backend_spec("mystery:1"), InvalidArgument);
  EXPECT_THROW(parse_backend_spec("constant:"), InvalidArgument);
  EXPECT_THROW(parse_backend_spec("noisy-table:p=1.5"), InvalidArgument);
  EXPECT_THROW(parse_backend_spec("noisy-table:p=abc"), InvalidArgument);
  EXPECT_THROW(parse_backend_spec("noisy-table:q=1"), InvalidArgument);
  EXPECT_THROW(parse_backend_spec("replay:"), InvalidArgument);
  EXPECT_THROW(record_replay("/nonexistent/cassette.jsonl"), IoError);
  EXPECT_THROW(make_backend(parse_backend_spec("noisy-table:p=0.1")), InvalidArgument);
}

}  // namespace
