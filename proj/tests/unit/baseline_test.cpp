#include <gtest/gtest.h>

#include "gem/baseline.hpp"
#include "test_support.hpp"

namespace gem {
namespace {

Timestamp at(std::uint64_t t) { return Timestamp{t, std::nullopt}; }

TEST(CrudStore, SameTextTwiceIsTwoRecords) {
  CrudStore s(5);
  s.put("Deadline: March 15", at(1));
  s.put("Deadline: March 15", at(2));
  EXPECT_EQ(s.size(), 2u);
}

TEST(CrudStore, FifoEvictionIgnoresAccess) {
  CrudStore s(2);
  s.put("Deadline: March 15", at(1));
  s.put("lunch preferences", at(2));
  for (int i = 0; i < 10; ++i) ASSERT_FALSE(s.query("Deadline", 1).empty());
  PutResult r = s.put("coffee machine broken", at(3));
  ASSERT_EQ(r.evicted.size(), 1u);
  EXPECT_EQ(r.evicted[0].text, "Deadline: March 15");
  EXPECT_EQ(s.records().front().text, "lunch preferences");
  EXPECT_THROW(CrudStore(0), std::invalid_argument);
}

TEST(CrudStore, StaleAndFreshAreBothCandidates) {
  CrudStore s(5);
  s.put("Website redesign kickoff. Deadline: March 15", at(1));
  s.put("Website redesign Deadline UPDATED: April 20", at(2));
  const std::string q = "What is the deadline for the Website Redesign?";
  const Digest before = s.digest();
  auto top = s.query(q, 2);
  EXPECT_EQ(s.digest(), before);
  ASSERT_EQ(top.size(), 2u);
  const auto qe = embed(q);
  EXPECT_GE(cosine(qe, top[0].embedding), cosine(qe, top[1].embedding));
  std::set<std::string> texts{top[0].text, top[1].text};
  EXPECT_TRUE(texts.count("Website redesign kickoff. Deadline: March 15"));
  EXPECT_TRUE(texts.count("Website redesign Deadline UPDATED: April 20"));
}

TEST(CrudStore, EmptyQuery) {
  CrudStore s(3);
  EXPECT_TRUE(s.query("anything", 3).empty());
}

TEST(BaselineAdapter, JournalReplaysAndRecordsEvictions) {
  EngineConfig config;
  config.baseline_capacity = 2;
  BaselineAdapter a(config);
  for (int i = 0; i < 3; ++i) {
    a.submit(event::Ingest{testing::bundle("note " + std::to_string(i), std::nullopt,
                                           {testing::fact("Note", "n" + std::to_string(i))})});
  }
  a.submit(event::Tick{});
  const Journal& j = a.journal();
  EXPECT_EQ(j.system, "crud-baseline");
  EXPECT_EQ(state_digest(replay(j)), state_digest(a.state()));
  bool removed = false;
  for (const auto& d : j.records[2].deltas) removed |= std::holds_alternative<delta::EntryRemoved>(d);
  EXPECT_TRUE(removed);
  EXPECT_EQ(a.store().size(), 2u);
  EXPECT_EQ(history(a.state(), TopicId{"records"}, "Note").size(), 2u);
}

TEST(BaselineAdapter, RetrievalNeverChangesSalience) {
  BaselineAdapter a(EngineConfig{});
  a.submit(event::Ingest{testing::bundle("Owner: Alice", "t", {testing::fact("Owner", "Alice")})});
  auto out = a.submit(event::Retrieve{testing::text_query("Owner")});
  ASSERT_TRUE(out.committed);
  ASSERT_EQ(out.output->answers.size(), 1u);
  for (const auto& d : a.journal().records.back().deltas) {
    EXPECT_FALSE(std::holds_alternative<delta::SalienceChanged>(d));
  }
}

}  // namespace
}  // namespace gem
