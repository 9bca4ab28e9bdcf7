#include <gtest/gtest.h>

#include <filesystem>

#include "gem/serialize.hpp"
#include "test_support.hpp"

namespace gem {
namespace {

std::uint32_t u32_at(const std::string& b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[off + static_cast<std::size_t>(i)]);
  return v;
}

const MemorySystem& three_weeks_engine() {
  static auto sys = testing::run_on(make_gem_system(testing::three_weeks_config()), testing::three_weeks_steps());
  return *sys;
}

TEST(Snapshot, ThreeWeeksRoundTripIsDigestExact) {
  const MemoryState& s = three_weeks_engine().state();
  const std::string bytes = encode_snapshot(s);
  const MemoryState back = decode_snapshot(bytes);
  EXPECT_EQ(state_digest(back), state_digest(s));
  EXPECT_EQ(encode_snapshot(back), bytes);
  // Embeddings are rebuilt exactly, not just digest-equal.
  for (const auto& [id, t] : s.topics) EXPECT_EQ(back.topics.at(id).embedding, t.embedding) << id.value;
}

TEST(Snapshot, GenesisLayout) {
  const MemoryState g = genesis_state(EngineConfig{});
  const std::string b = encode_snapshot(g);
  ASSERT_GE(b.size(), 12u + 32u);
  EXPECT_EQ(b.substr(0, 4), "GEMS");
  EXPECT_EQ(u32_at(b, 4), kSnapshotVersion);
  const std::uint32_t len = u32_at(b, 8);
  EXPECT_EQ(b.size(), 12u + len + 32u);
  const Digest d = state_digest(g);
  EXPECT_EQ(b.substr(12 + len), std::string(d.begin(), d.end()));
  EXPECT_NO_THROW(Json::parse(b.substr(12, len)));
}

TEST(Snapshot, TruncatedOrTamperedIsCorruption) {
  const std::string b = encode_snapshot(three_weeks_engine().state());
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, b.size() / 2, b.size() - 1}) {
    EXPECT_THROW(decode_snapshot(b.substr(0, cut)), CorruptionError) << cut;
  }
  std::string bad = b;
  bad.back() ^= 1;
  EXPECT_THROW(decode_snapshot(bad), CorruptionError);
  EXPECT_THROW(decode_snapshot(b + "x"), CorruptionError);
}

TEST(Journal, EncodeDecodeRoundTrip) {
  const Journal& j = three_weeks_engine().journal();
  const std::string bytes = encode_journal(j);
  EXPECT_EQ(bytes.substr(0, 4), "GEMJ");
  EXPECT_EQ(u32_at(bytes, 4), kJournalVersion);
  const Journal back = decode_journal(bytes);
  EXPECT_EQ(back.records.size(), j.records.size());
  EXPECT_EQ(encode_journal(back), bytes);
  EXPECT_EQ(state_digest(replay(back)), state_digest(three_weeks_engine().state()));
}

TEST(Journal, TruncatedMidRecordIsCorruption) {
  const std::string bytes = encode_journal(three_weeks_engine().journal());
  for (std::size_t cut : {bytes.size() - 1, bytes.size() - 40, bytes.size() / 2, std::size_t{6}}) {
    EXPECT_THROW(decode_journal(bytes.substr(0, cut)), CorruptionError) << cut;
  }
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_journal(bad), CorruptionError);
}

TEST(Journal, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "gem_serialize_test.gemj";
  write_journal(path, three_weeks_engine().journal());
  EXPECT_EQ(encode_journal(read_journal(path)), encode_journal(three_weeks_engine().journal()));
  std::filesystem::remove(path);
  EXPECT_THROW(read_journal(path), std::runtime_error);
}

TEST(Json, RecordsRoundTrip) {
  for (const auto& r : three_weeks_engine().journal().records) {
    const Json j = to_json(r);
    EXPECT_EQ(to_json(record_from_json(j)), j);
  }
}

TEST(Json, EveryDeltaKindRoundTrips) {
  ValueEntry e;
  e.value = "v";
  e.at = Timestamp{3, {}};
  e.prov = Provenance{"s", 3, "x"};
  ValueEntry summary = e;
  summary.compressed = true;
  summary.superseded = true;
  summary.summarized = {SummarizedValue{"a", Timestamp{1, {}}, Provenance{"s", 1, "a"}}};
  const TopicId t{"t"};
  const std::vector<Delta> all = {
      delta::TopicCreated{t, "T", "sum"},
      delta::FieldCreated{t, "F", std::string("tag"), 1.0, Tier::Compressed, 4},
      delta::EntryAppended{t, "F", e},
      delta::EntryFlagged{t, "F", 0, true},
      delta::HistoryCompressed{t, "F", 2, summary},
      delta::SalienceChanged{t, "F", 0.1, 0.30000000000000004},
      delta::FieldAccessed{t, "F", 9},
      delta::TierChanged{t, "F", Tier::Active, Tier::Hidden},
      delta::TopicArchived{t, true, TopicId{"u"}},
      delta::EdgeAdded{Edge{t, TopicId{"u"}, EdgeKind::Association, Timestamp{2, {}}}},
      delta::EdgeRemoved{Edge{t, TopicId{"u"}, EdgeKind::Extension, Timestamp{2, {}}}},
      delta::EmbeddingRefreshed{t},
      delta::RevisionFlagged{RevisionFlag{t, TopicId{"u"}, "F"}, true, EdgeKind::Extension},
      delta::MarkChanged{t, MarkKind::Archive},
      delta::EntryRemoved{t, "F", 0},
      delta::FieldRemoved{t, "F"},
  };
  ASSERT_EQ(all.size(), std::variant_size_v<Delta>);
  for (const auto& d : all) {
    const Json j = to_json(d);
    EXPECT_EQ(j.at("kind"), delta_kind(d));
    EXPECT_EQ(to_json(delta_from_json(j)), j) << j.dump();
  }
}

TEST(Config, JsonRoundTripAndErrors) {
  EngineConfig c = testing::three_weeks_config();
  c.beta = BetaSpec{50, 0.5};
  c.salience.decay_factor = 0.8;
  const Json j = config_to_json(c);
  const EngineConfig back = config_from_json(j);
  EXPECT_EQ(config_to_json(back), j);
  EXPECT_EQ(back.dependency_rules, c.dependency_rules);
  EXPECT_EQ(back.beta, c.beta);
  EXPECT_EQ(back.baseline_capacity, 5u);
  EXPECT_THROW(config_from_json_text("{\"betta\": 3}", "."), ConfigError);
  EXPECT_THROW(config_from_json_text("{\"salience\": {\"lambda\": 2}}", "."), ConfigError);
  EXPECT_THROW(config_from_json_text("[1,", "."), ConfigError);
  EXPECT_DOUBLE_EQ(config_from_json_text("{\"beta\": 100}", ".").beta.at(1000), 100.0);
}

TEST(DependencyRules, ParseRenderRoundTrip) {
  const auto rules = parse_dependency_rules("# c\na.Deadline -> *.Launch : shift-annotation\n\n");
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_TRUE(rules[0].matches_cause("a", "Deadline"));
  EXPECT_FALSE(rules[0].matches_cause("b", "Deadline"));
  EXPECT_TRUE(rules[0].matches_dependent("anything", "Launch"));
  EXPECT_EQ(parse_dependency_rules(render_dependency_rules(rules)), rules);
  EXPECT_THROW(parse_dependency_rules("a.Deadline => b.Launch"), ConfigError);
}

}  // namespace
}  // namespace gem
