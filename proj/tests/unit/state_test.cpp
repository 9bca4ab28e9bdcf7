#include <gtest/gtest.h>

#include "gem/delta.hpp"
#include "gem/state.hpp"
#include "test_support.hpp"

namespace gem {
namespace {

const TopicId kWeb{"website-redesign"};

ValueEntry entry(std::string value, std::uint64_t tick, std::string source) {
  ValueEntry e;
  e.value = std::move(value);
  e.at = Timestamp{tick, std::nullopt};
  e.prov = Provenance{std::move(source), tick, "excerpt"};
  return e;
}

MemoryState deadline_state() {
  MemoryState s;
  apply_delta(s, delta::TopicCreated{kWeb, "Website Redesign", ""});
  apply_delta(s, delta::FieldCreated{kWeb, "Deadline", std::nullopt, 1.0, Tier::Active, 0});
  apply_delta(s, delta::EntryAppended{kWeb, "Deadline", entry("March 15", 0, "pi0")});
  apply_delta(s, delta::EntryFlagged{kWeb, "Deadline", 0, true});
  apply_delta(s, delta::EntryAppended{kWeb, "Deadline", entry("April 20", 1, "pi1")});
  return s;
}

TEST(CurrentValue, LatestNonSupersededEntry) {
  auto v = current_value(deadline_state(), kWeb, "Deadline");
  ASSERT_TRUE(v);
  EXPECT_EQ(v->value, "April 20");
  EXPECT_EQ(v->at.tick, 1u);
  EXPECT_EQ(v->prov.source_id, "pi1");
}

TEST(CurrentValue, AbsentCases) {
  EXPECT_FALSE(current_value(MemoryState{}, kWeb, "Deadline"));
  MemoryState s = deadline_state();
  EXPECT_FALSE(current_value(s, kWeb, "Owner"));
  apply_delta(s, delta::TierChanged{kWeb, "Deadline", Tier::Active, Tier::Hidden});
  EXPECT_FALSE(current_value(s, kWeb, "Deadline"));
  EXPECT_EQ(lookup_current(s, kWeb, "Deadline")->value, "April 20");
  apply_delta(s, delta::TopicArchived{kWeb, true, std::nullopt});
  EXPECT_EQ(lookup_current(s, kWeb, "Deadline")->value, "April 20");
}

TEST(History, KeepsSupersededEntries) {
  const auto s = deadline_state();
  const auto& h = history(s, kWeb, "Deadline");
  ASSERT_EQ(h.size(), 2u);
  EXPECT_TRUE(h[0].superseded);
  EXPECT_EQ(h[0].value, "March 15");
  EXPECT_FALSE(h[1].superseded);
}

TEST(History, FreshFieldHasOneLiveEntry) {
  MemoryState s;
  apply_delta(s, delta::TopicCreated{kWeb, "t", ""});
  apply_delta(s, delta::FieldCreated{kWeb, "Owner", std::nullopt, 1.0, Tier::Active, 0});
  apply_delta(s, delta::EntryAppended{kWeb, "Owner", entry("Alice", 1, "s")});
  ASSERT_EQ(history(s, kWeb, "Owner").size(), 1u);
  EXPECT_FALSE(history(s, kWeb, "Owner")[0].superseded);
}

TEST(History, UnknownKeyIsNamed) {
  const auto s = deadline_state();
  try {
    history(s, kWeb, "Budget");
    FAIL();
  } catch (const LookupError& e) {
    EXPECT_NE(std::string(e.what()).find("Budget"), std::string::npos);
  }
  EXPECT_THROW(history(s, TopicId{"nope"}, "Deadline"), LookupError);
}

TEST(ActiveFootprint, CountsActiveFieldsOfLiveTopics) {
  EXPECT_EQ(active_footprint(MemoryState{}), 0u);
  MemoryState s;
  const TopicId a{"a"}, b{"b"};
  apply_delta(s, delta::TopicCreated{a, "a", ""});
  apply_delta(s, delta::TopicCreated{b, "b", ""});
  apply_delta(s, delta::FieldCreated{a, "x", std::nullopt, 1.0, Tier::Active, 0});
  apply_delta(s, delta::FieldCreated{a, "y", std::nullopt, 1.0, Tier::Active, 0});
  apply_delta(s, delta::FieldCreated{b, "x", std::nullopt, 1.0, Tier::Active, 0});
  apply_delta(s, delta::FieldCreated{b, "z", std::nullopt, 0.1, Tier::Hidden, 0});
  EXPECT_EQ(active_footprint(s), 3u);
  apply_delta(s, delta::TopicArchived{b, true, std::nullopt});
  EXPECT_EQ(active_footprint(s), 2u);
}

TEST(ActiveFootprint, ThreeWeeksWeekOneMatchesJournalRecount) {
  auto steps = testing::three_weeks_steps();
  // Keep everything up to and including the week-1 query.
  std::size_t queries = 0, cut = 0;
  for (; cut < steps.size(); ++cut) {
    if (std::holds_alternative<step::Query>(steps[cut].op) && ++queries == 2) break;
  }
  steps.resize(cut + 1);
  auto sys = testing::run_on(make_gem_system(testing::three_weeks_config()), steps);

  // Independent counter: tiers and archival as set by the journaled deltas.
  std::map<std::pair<std::string, std::string>, Tier> tiers;
  std::set<std::string> archived;
  for (const auto& rec : sys->journal().records) {
    if (!rec.committed) continue;
    for (const auto& d : rec.deltas) {
      if (const auto* x = std::get_if<delta::FieldCreated>(&d)) tiers[{x->topic.value, x->field}] = x->tier;
      if (const auto* x = std::get_if<delta::TierChanged>(&d)) tiers[{x->topic.value, x->field}] = x->to;
      if (const auto* x = std::get_if<delta::TopicArchived>(&d)) {
        if (x->archived) archived.insert(x->topic.value);
        else archived.erase(x->topic.value);
      }
    }
  }
  std::size_t expected = 0;
  for (const auto& [unit, tier] : tiers) expected += tier == Tier::Active && !archived.count(unit.first);
  EXPECT_EQ(active_footprint(sys->state()), expected);
  EXPECT_GT(expected, 0u);
}

TEST(StateDigest, StableAndSensitive) {
  const auto s = deadline_state();
  EXPECT_EQ(state_digest(s), state_digest(s));
  MemoryState t = s;
  apply_delta(t, delta::SalienceChanged{kWeb, "Deadline", 1.0, 0.9});
  EXPECT_NE(state_digest(s), state_digest(t));
  EXPECT_EQ(digest_from_hex(to_hex(state_digest(s))), state_digest(s));
  EXPECT_EQ(to_hex(state_digest(s)).size(), 64u);
}

TEST(StateDigest, IndependentOfInsertionOrder) {
  MemoryState a, b;
  for (const char* id : {"x", "y"}) apply_delta(a, delta::TopicCreated{TopicId{id}, id, ""});
  for (const char* id : {"y", "x"}) apply_delta(b, delta::TopicCreated{TopicId{id}, id, ""});
  EXPECT_EQ(state_digest(a), state_digest(b));
}

TEST(Compression, PrefixKeepsCurrentAndRecent) {
  Field f;
  for (int i = 0; i < 6; ++i) {
    auto e = entry("v" + std::to_string(i), static_cast<std::uint64_t>(i), "s");
    e.superseded = i < 5;
    f.history.push_back(e);
  }
  EXPECT_EQ(compressible_prefix(f, 3), 2u);
  EXPECT_TRUE(worth_compressing(f, 3));
  EXPECT_EQ(compressible_prefix(f, 5), 0u);
  f.history.resize(5);
  f.history.back().superseded = false;
  EXPECT_EQ(compressible_prefix(f, 3), 1u);
  EXPECT_FALSE(worth_compressing(f, 3));
}

TEST(Compression, SummaryOfTenCarriesTenProvenanceRecords) {
  MemoryState s;
  apply_delta(s, delta::TopicCreated{kWeb, "w", ""});
  apply_delta(s, delta::FieldCreated{kWeb, "Status", std::nullopt, 0.3, Tier::Active, 0});
  for (int i = 0; i < 14; ++i) {
    if (i) apply_delta(s, delta::EntryFlagged{kWeb, "Status", static_cast<std::size_t>(i - 1), true});
    apply_delta(s, delta::EntryAppended{kWeb, "Status", entry("s" + std::to_string(i), i + 1u, "src" + std::to_string(i))});
  }
  const Field& f = *find_field(s, kWeb, "Status");
  ASSERT_EQ(compressible_prefix(f, 3), 10u);
  const auto before = reachable_provenance(f);
  ValueEntry summary;
  summary.value = "10 earlier values";
  summary.compressed = true;
  summary.superseded = true;
  summary.at = f.history[9].at;
  summary.prov = Provenance{"compression", 20, ""};
  for (std::size_t i = 0; i < 10; ++i) summary.summarized.push_back({f.history[i].value, f.history[i].at, f.history[i].prov});
  apply_delta(s, delta::HistoryCompressed{kWeb, "Status", 10, summary});
  const auto& h = history(s, kWeb, "Status");
  ASSERT_EQ(h.size(), 5u);
  EXPECT_TRUE(h[0].compressed);
  EXPECT_EQ(h[0].summarized.size(), 10u);
  EXPECT_EQ(reachable_provenance(*find_field(s, kWeb, "Status")), before);
  EXPECT_EQ(lookup_current(s, kWeb, "Status")->value, "s13");
}

TEST(HideOrder, SalienceThenAccessThenName) {
  MemoryState s;
  const TopicId a{"a"}, b{"b"};
  apply_delta(s, delta::TopicCreated{a, "a", ""});
  apply_delta(s, delta::TopicCreated{b, "b", ""});
  apply_delta(s, delta::FieldCreated{a, "low", std::nullopt, 0.3, Tier::Active, 9});
  apply_delta(s, delta::FieldCreated{a, "old", std::nullopt, 0.6, Tier::Active, 1});
  apply_delta(s, delta::FieldCreated{b, "new", std::nullopt, 0.6, Tier::Active, 5});
  apply_delta(s, delta::FieldCreated{a, "x", std::nullopt, 0.6, Tier::Active, 5});
  apply_delta(s, delta::FieldCreated{b, "hidden", std::nullopt, 0.0, Tier::Hidden, 0});
  const std::vector<UnitRef> expected{{a, "low"}, {a, "old"}, {b, "new"}, {a, "x"}};
  EXPECT_EQ(hide_order(s), expected);
  EXPECT_EQ(attenuation_rank(s, UnitRef{a, "x"}), 0u);
  EXPECT_EQ(attenuation_rank(s, UnitRef{b, "hidden"}), 4u);
}

TEST(Successors, ByKind) {
  MemoryState s;
  for (const char* id : {"a", "b", "c"}) apply_delta(s, delta::TopicCreated{TopicId{id}, id, ""});
  apply_delta(s, delta::EdgeAdded{Edge{TopicId{"a"}, TopicId{"b"}, EdgeKind::Extension, {}}});
  apply_delta(s, delta::EdgeAdded{Edge{TopicId{"a"}, TopicId{"c"}, EdgeKind::Association, {}}});
  EXPECT_EQ(successors(s, TopicId{"a"}, EdgeKind::Extension), std::vector<TopicId>{TopicId{"b"}});
  EXPECT_EQ(successors(s, TopicId{"a"}, EdgeKind::Association), std::vector<TopicId>{TopicId{"c"}});
  EXPECT_TRUE(successors(s, TopicId{"b"}, EdgeKind::Extension).empty());
}

TEST(ApplyDelta, RejectsMisfits) {
  MemoryState s;
  EXPECT_THROW(apply_delta(s, delta::FieldCreated{kWeb, "x", std::nullopt, 1.0, Tier::Active, 0}), std::logic_error);
  EXPECT_THROW(apply_delta(s, delta::EdgeAdded{Edge{kWeb, TopicId{"m"}, EdgeKind::Extension, {}}}), std::logic_error);
}

}  // namespace
}  // namespace gem
