#include <gtest/gtest.h>

#include "gem/engine.hpp"
#include "gem/serialize.hpp"
#include "test_support.hpp"

namespace gem {
namespace {

using testing::bundle;
using testing::fact;

const TopicId kWeb{"website-redesign"};
const TopicId kMilestones{"milestones"};

FactBundle deadline(std::string value) {
  return bundle("Website redesign Deadline: " + value, "website-redesign", {fact("Deadline", value)});
}

// Week-0 shape of the running example: deadline plus a dependent milestone.
Engine week0() {
  Engine e(testing::three_weeks_config());
  e.submit(event::Ingest{deadline("March 15")});
  e.submit(event::Ingest{bundle("Milestones: launch one week after the deadline", "milestones",
                                {fact("Launch", "one week after March 15")}, {testing::extension_from("website-redesign")})});
  return e;
}

TEST(ApplyEvent, DeadlineUpdateFlagsMilestones) {
  Engine e = week0();
  EmbeddingRouter router;
  TransitionResult r = apply_event(e.state(), event::Ingest{deadline("April 20")}, e.config(), router);
  ASSERT_TRUE(r.record.committed) << r.record.abort_reason;
  EXPECT_EQ(history(r.next, kWeb, "Deadline").size(), 2u);
  EXPECT_TRUE(r.next.revision_queue.count(RevisionFlag{kMilestones, kWeb, "Deadline"}));
  EXPECT_EQ(*r.record.tick, e.state().clock.tick + 1);
  EXPECT_EQ(r.next.clock.tick, *r.record.tick);
  EXPECT_EQ(r.next.interactions, e.state().interactions + 1);
  bool logged = false;
  for (const auto& ev : r.record.policy_log) logged |= ev.policy == "propagate-on-change" && ev.fired;
  EXPECT_TRUE(logged);
}

TEST(ApplyEvent, FootprintCapAbortsAndLeavesStateUntouched) {
  EngineConfig config;
  config.beta.constant = 3;
  EmbeddingRouter router;
  MemoryState s = genesis_state(config);
  for (const char* f : {"A", "B", "C"}) {
    auto r = apply_event(s, event::Ingest{bundle(f, "t", {fact(f, "1")})}, config, router);
    ASSERT_TRUE(r.record.committed);
    s = r.next;
  }
  const Digest before = state_digest(s);
  auto r = apply_event(s, event::Ingest{bundle("D", "t", {fact("D", "1")})}, config, router);
  EXPECT_FALSE(r.record.committed);
  EXPECT_EQ(r.record.abort_reason, "bounded-active-state");
  EXPECT_FALSE(r.record.tick);
  EXPECT_TRUE(r.record.deltas.empty());
  EXPECT_EQ(state_digest(r.next), before);
  EXPECT_EQ(r.proposed_footprint, 4u);
  EXPECT_DOUBLE_EQ(r.beta, 3.0);
}

TEST(ApplyEvent, OperatorFailureAborts) {
  EngineConfig config;
  EmbeddingRouter router;
  MemoryState s = genesis_state(config);
  auto r = apply_event(s, event::Retrieve{testing::explicit_query("nope", "x")}, config, router);
  EXPECT_FALSE(r.record.committed);
  EXPECT_EQ(r.record.abort_reason.rfind("unknown-unit", 0), 0u);
  EXPECT_EQ(state_digest(r.next), state_digest(s));
}

TEST(ApplyEvent, RepeatedRetrievalRaisesPreSalience) {
  Engine e = week0();
  const Query q = testing::text_query("What is the deadline for the Website Redesign?");
  auto r1 = e.apply(event::Retrieve{q});
  auto r2 = e.apply(event::Retrieve{q});
  auto pre = [](const TransitionRecord& r) {
    for (const auto& d : r.deltas) {
      if (const auto* x = std::get_if<delta::SalienceChanged>(&d)) {
        if (x->topic == kWeb && x->field == "Deadline") return x->from;
      }
    }
    return -1.0;
  };
  ASSERT_GE(pre(r1.record), 0.0);
  EXPECT_GT(pre(r2.record), pre(r1.record));
  EXPECT_DOUBLE_EQ(pre(r2.record), pre(r1.record) + 1.0);
}

TEST(Submit, RetrieveDrainsPendingRevisionFirst) {
  Engine e = week0();
  e.submit(event::Ingest{deadline("April 20")});
  ASSERT_FALSE(e.state().revision_queue.empty());
  auto out = e.submit(event::Retrieve{testing::text_query("When is the launch milestone?")});
  ASSERT_TRUE(out.committed);
  EXPECT_TRUE(e.state().revision_queue.empty());
  const auto launch = current_value(e.state(), kMilestones, "Launch");
  ASSERT_TRUE(launch);
  EXPECT_NE(launch->value.find("April 20"), std::string::npos);
  const auto& hist = history(e.state(), kMilestones, "Launch");
  ASSERT_EQ(hist.size(), 2u);
  EXPECT_EQ(hist[1].prov.source_id, "derived:website-redesign.Deadline");
}

TEST(Submit, TickDecaysEveryField) {
  Engine e = week0();
  const double before = find_field(e.state(), kWeb, "Deadline")->salience;
  e.submit(event::Tick{});
  EXPECT_DOUBLE_EQ(find_field(e.state(), kWeb, "Deadline")->salience, before * 0.9);
  EXPECT_EQ(e.journal().records.back().op, "tick");
}

TEST(Submit, PressureReliefMakesRoomByRelevance) {
  EngineConfig config;
  config.beta.constant = 3;
  Engine e(config);
  for (const char* f : {"A", "B", "C"}) e.submit(event::Ingest{bundle(f, "t", {fact(f, "1")})});
  e.submit(event::Retrieve{testing::explicit_query("t", "A")});
  e.submit(event::Retrieve{testing::explicit_query("t", "C")});
  auto out = e.submit(event::Ingest{bundle("D", "t", {fact("D", "1")})});
  ASSERT_TRUE(out.committed) << out.abort_reason;
  EXPECT_EQ(find_field(e.state(), TopicId{"t"}, "B")->tier, Tier::Hidden);
  EXPECT_EQ(active_footprint(e.state()), 3u);
  EXPECT_EQ(lookup_current(e.state(), TopicId{"t"}, "B")->value, "1");
}

TEST(Replay, ThreeWeeksJournalReproducesLiveDigest) {
  auto sys = testing::run_on(make_gem_system(testing::three_weeks_config()), testing::three_weeks_steps());
  std::size_t visited = 0;
  const MemoryState replayed = replay(sys->journal(), [&](const auto&, std::size_t, const auto&, const auto&) { ++visited; });
  EXPECT_EQ(state_digest(replayed), state_digest(sys->state()));
  std::size_t committed = 0;
  for (const auto& r : sys->journal().records) committed += r.committed;
  EXPECT_EQ(visited, committed);
}

TEST(Replay, EmptyJournalIsGenesis) {
  Journal j;
  j.genesis = genesis_state(j.config);
  EXPECT_EQ(state_digest(replay(j)), state_digest(genesis_state(EngineConfig{})));
}

TEST(Replay, TamperedDigestNamesTick) {
  Engine e = week0();
  Journal j = e.journal();
  ASSERT_GE(j.records.size(), 2u);
  j.records[1].digest_after->at(0) ^= 0xff;
  try {
    replay(j);
    FAIL();
  } catch (const CorruptionError& err) {
    ASSERT_TRUE(err.tick());
    EXPECT_EQ(*err.tick(), *j.records[1].tick);
  }
}

TEST(Replay, TickGapIsCorruption) {
  Engine e = week0();
  Journal j = e.journal();
  j.records.erase(j.records.begin());
  EXPECT_THROW(replay(j), CorruptionError);
}

TEST(Engine, SameInputsSameJournalBytes) {
  auto a = testing::run_on(make_gem_system(testing::three_weeks_config()), testing::three_weeks_steps());
  auto b = testing::run_on(make_gem_system(testing::three_weeks_config()), testing::three_weeks_steps());
  EXPECT_EQ(encode_journal(a->journal()), encode_journal(b->journal()));
}

TEST(Engine, InvalidConfigIsRejected) {
  EngineConfig c;
  c.salience.decay_factor = 1.5;
  EXPECT_THROW(Engine{c}, ConfigError);
}

}  // namespace
}  // namespace gem
