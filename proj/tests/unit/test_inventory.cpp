#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "cape/error.hpp"
#include "cape/inventory.hpp"

namespace {

using cape::Inventory;
using cape::Trait;
using nlohmann::json;

const std::filesystem::path kData = CAPE_DATA_DIR;

json toy_doc() {
  json items = json::array();
  const char* traits = "OOCCEEAANN";
  for (int i = 0; i < 10; ++i) {
    items.push_back({{"id", "t" + std::to_string(i)},
                     {"text", "do thing " + std::to_string(i)},
                     {"trait", std::string(1, traits[i])},
                     {"key", i % 2 == 0 ? 1 : -1}});
  }
  return {{"schema_version", 1}, {"name", "toy"}, {"items", items}};
}

TEST(Inventory, Mpi120HasAllItemsInFileOrder) {
  const auto inv = cape::load_inventory(kData / "inventories/mpi_120.json");
  EXPECT_EQ(inv.name(), "MPI-120");
  ASSERT_EQ(inv.size(), 120u);
  EXPECT_EQ(inv.items().front().id, "q1");
  EXPECT_EQ(inv.items().back().id, "q120");
  EXPECT_EQ(inv.index_of("q42"), 41u);
}

TEST(Inventory, Mpi120PerTraitCountsMatchTheFile) {
  const auto inv = cape::load_inventory(kData / "inventories/mpi_120.json");
  const auto doc = cape::read_json_file(kData / "inventories/mpi_120.json");
  std::map<std::string, std::size_t> raw;
  for (const auto& item : doc["items"]) ++raw[item["trait"].get<std::string>()];
  const auto counts = cape::items_per_trait(inv);
  for (Trait t : cape::kAllTraits) {
    EXPECT_EQ(counts.at(t), raw[std::string(1, cape::trait_letter(t))]);
    EXPECT_EQ(counts.at(t), 24u);
  }
}

TEST(Inventory, ToyCountsAreTwoPerTraitAndSumToM) {
  const auto inv = cape::parse_inventory(toy_doc());
  const auto counts = cape::items_per_trait(inv);
  std::size_t total = 0;
  for (const auto& [t, c] : counts) {
    EXPECT_EQ(c, 2u);
    total += c;
  }
  EXPECT_EQ(total, inv.size());
}

TEST(Inventory, RejectsUnknownTraitNamingTheRow) {
  auto doc = toy_doc();
  doc["items"][3]["trait"] = "X";
  try {
    cape::parse_inventory(doc);
    FAIL() << "expected a schema error";
  } catch (const cape::SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("t3"), std::string::npos) << e.what();
  }
}

TEST(Inventory, RejectsBadKeyDuplicateIdsAndEmptyText) {
  auto bad_key = toy_doc();
  bad_key["items"][0]["key"] = 2;
  EXPECT_THROW(cape::parse_inventory(bad_key), cape::SchemaError);

  auto dup = toy_doc();
  dup["items"][1]["id"] = "t0";
  EXPECT_THROW(cape::parse_inventory(dup), cape::SchemaError);

  auto empty_text = toy_doc();
  empty_text["items"][2]["text"] = "";
  EXPECT_THROW(cape::parse_inventory(empty_text), cape::SchemaError);

  auto no_items = toy_doc();
  no_items["items"] = json::array();
  EXPECT_THROW(cape::parse_inventory(no_items), cape::SchemaError);
}

TEST(Inventory, SingleItemInventoryIsRejectedForMissingTraits) {
  json doc = {{"schema_version", 1},
              {"name", "one"},
              {"items", {{{"id", "a"}, {"text", "x"}, {"trait", "O"}, {"key", 1}}}}};
  EXPECT_THROW(cape::parse_inventory(doc), cape::Error);
}

TEST(Inventory, RoundTripIsStable) {
  const auto doc = cape::read_json_file(kData / "inventories/toy_10.json");
  const auto inv = cape::parse_inventory(doc);
  const auto again = cape::parse_inventory(inv.to_json());
  EXPECT_EQ(inv.to_json().dump(), again.to_json().dump());
  EXPECT_EQ(inv.to_json()["items"], doc["items"]);
}

TEST(Inventory, LoadIsDeterministic) {
  const auto a = cape::load_inventory(kData / "inventories/mpi_120.json");
  const auto b = cape::load_inventory(kData / "inventories/mpi_120.json");
  EXPECT_EQ(a.items(), b.items());
}

TEST(Pairs, BundledPairFilesHaveExpectedSizes) {
  const auto inv = cape::load_inventory(kData / "inventories/mpi_120.json");
  const auto similar = cape::load_pairs(kData / "pairs/mpi_120_similar.json", inv);
  const auto inconsistent = cape::load_pairs(kData / "pairs/mpi_120_inconsistent.json", inv);
  EXPECT_EQ(similar.kind, cape::PairKind::kSemanticallySimilar);
  EXPECT_EQ(similar.pairs.size(), 38u);
  EXPECT_EQ(inconsistent.kind, cape::PairKind::kLogicallyInconsistent);
  EXPECT_EQ(inconsistent.pairs.size(), 73u);
}

TEST(Pairs, UnknownIdIsNamed) {
  const auto inv = cape::load_inventory(kData / "inventories/mpi_120.json");
  json doc = {{"schema_version", 1}, {"kind", "semantically-similar"}, {"pairs", json::array({json::array({"q1", "q999"})})}};
  try {
    cape::parse_pairs(doc, inv);
    FAIL() << "expected an error";
  } catch (const cape::Error& e) {
    EXPECT_NE(std::string(e.what()).find("q999"), std::string::npos);
  }
}

TEST(Pairs, SelfPairAndRepeatsAreRejected) {
  const auto inv = cape::load_inventory(kData / "inventories/mpi_120.json");
  json self = {{"schema_version", 1}, {"kind", "semantically-similar"}, {"pairs", json::array({json::array({"q1", "q1"})})}};
  EXPECT_THROW(cape::parse_pairs(self, inv), cape::Error);
  json rep = {{"schema_version", 1}, {"kind", "semantically-similar"}, {"pairs", json::array({json::array({"q1", "q2"}), json::array({"q2", "q1"})})}};
  EXPECT_THROW(cape::parse_pairs(rep, inv), cape::Error);
}

TEST(Paraphrases, VariantZeroIsTheOriginal) {
  const auto inv = cape::load_inventory(kData / "inventories/toy_10.json");
  const auto para = cape::load_paraphrases(kData / "paraphrases/toy_10_paraphrases.json", inv);
  const auto& n1 = inv.at("n1");
  EXPECT_EQ(para.text_for(n1, 0), n1.text);
  EXPECT_NE(para.text_for(n1, 1), n1.text);
  EXPECT_NE(para.text_for(n1, 2), para.text_for(n1, 1));
  EXPECT_THROW(para.text_for(n1, 3), cape::Error);
}

}  // namespace
