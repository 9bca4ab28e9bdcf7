#pragma once

#include <cstdint>
#include <deque>
#include <set>
#include <filesystem>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gem/audit.hpp"
#include "gem/config.hpp"
#include "gem/engine.hpp"
#include "gem/policy.hpp"
#include "gem/serialize.hpp"
#include "gem/workload.hpp"

namespace gem::testing {

inline std::filesystem::path source_dir() { return GEM_SOURCE_DIR; }
inline std::filesystem::path workload_dir() { return source_dir() / "workloads"; }

inline EngineConfig three_weeks_config() { return load_config(workload_dir() / "three_weeks.config.json"); }
inline std::vector<WorkloadStep> three_weeks_steps() { return load_workload(workload_dir() / "three_weeks.workload"); }
inline std::vector<Query> three_weeks_probes() { return load_probes(workload_dir() / "three_weeks.probes"); }

inline Fact fact(std::string field, std::string value, std::string source = "test",
                 std::optional<std::string> tag = std::nullopt) {
  Fact f;
  f.field = std::move(field);
  f.value = std::move(value);
  f.source_id = std::move(source);
  f.entity_tag = std::move(tag);
  return f;
}

inline FactBundle bundle(std::string text, std::optional<std::string> hint, std::vector<Fact> facts,
                         std::vector<Link> links = {}) {
  FactBundle b;
  b.text = std::move(text);
  if (hint) b.topic_hint = TopicId{*hint};
  b.facts = std::move(facts);
  b.links = std::move(links);
  return b;
}

inline Link extension_from(std::string topic) { return Link{TopicId{std::move(topic)}, EdgeKind::Extension, false}; }
inline Link association_to(std::string topic) { return Link{TopicId{std::move(topic)}, EdgeKind::Association, true}; }

inline Query text_query(std::string text) {
  Query q;
  q.text = std::move(text);
  return q;
}

inline Query explicit_query(std::string topic, std::string field) {
  Query q;
  q.text = topic + "." + field;
  q.explicit_unit = UnitRef{TopicId{std::move(topic)}, std::move(field)};
  return q;
}

// Runs a parsed workload on the engine and returns it for inspection.
inline std::unique_ptr<MemorySystem> run_on(std::unique_ptr<MemorySystem> sys, const std::vector<WorkloadStep>& steps,
                                            RunResult* out = nullptr) {
  RunResult r = run_workload(*sys, steps);
  if (out) *out = std::move(r);
  return sys;
}

// Topics a BFS over Extension edges reaches from the changed cause when
// only topics holding a rule-matching field pass the gate and propagate.
inline std::set<TopicId> gated_bfs(const MemoryState& s, const std::vector<DependencyRule>& rules, const TopicId& start,
                            const std::string& field) {
  std::set<TopicId> changed;
  std::deque<std::pair<TopicId, std::vector<std::string>>> frontier{{start, {field}}};
  std::set<TopicId> seen{start};
  while (!frontier.empty()) {
    auto [cause, fields] = frontier.front();
    frontier.pop_front();
    for (const auto& next : successors(s, cause, EdgeKind::Extension)) {
      if (seen.count(next)) continue;
      std::vector<std::string> hit;
      for (const auto& [name, f] : s.topics.at(next).fields) {
        for (const auto& cf : fields) {
          for (const auto& r : rules) {
            if (r.matches_cause(cause.value, cf) && r.matches_dependent(next.value, name)) hit.push_back(name);
          }
        }
      }
      if (hit.empty()) continue;
      seen.insert(next);
      changed.insert(next);
      frontier.emplace_back(next, hit);
    }
  }
  return changed;
}

// ---------------------------------------------------------------------------
// Random workloads

struct GeneratedWorkload {
  std::uint64_t seed = 0;
  EngineConfig config;
  std::vector<EngineEvent> events;
};

class WorkloadGenerator {
 public:
  explicit WorkloadGenerator(std::uint64_t seed) : seed_(seed), rng_(seed) {}

  GeneratedWorkload generate(std::size_t events) {
    GeneratedWorkload w;
    w.seed = seed_;
    w.config = config();
    w.events.reserve(events);
    while (w.events.size() < events) {
      const int roll = pick(0, 99);
      if (roll < 45) {
        w.events.emplace_back(event::Ingest{random_bundle()});
      } else if (roll < 75) {
        w.events.emplace_back(event::Retrieve{random_query()});
      } else {
        const int run = pick(1, 4);
        for (int i = 0; i < run; ++i) w.events.emplace_back(event::Tick{});
      }
    }
    return w;
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(int percent) { return pick(0, 99) < percent; }

  template <class T>
  const T& any(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(pick(0, static_cast<int>(v.size()) - 1))];
  }

  EngineConfig config() {
    EngineConfig c;
    const int mode = pick(0, 3);
    if (mode == 1) c.beta.constant = pick(4, 12);  // tight: exercises pressure relief
    if (mode == 2) {
      c.beta.constant = pick(6, 10);
      c.beta.slope = 0.05;
    }
    if (chance(50)) c.salience.decay_factor = 0.8;
    c.dependency_rules = parse_dependency_rules(
        "*.Deadline -> *.Launch : shift-annotation\n"
        "*.Budget -> *.Status : shift-annotation\n");
    return c;
  }

  FactBundle random_bundle() {
    FactBundle b;
    std::string topic;
    if (chance(80)) {
      topic = any(topics_);
      b.topic_hint = TopicId{topic};
    }
    const int n = pick(1, 3);
    std::string text = topic.empty() ? any(chatter_) : topic + " update.";
    for (int i = 0; i < n; ++i) {
      Fact f;
      f.field = any(fields_);
      f.value = any(values_) + " " + std::to_string(pick(1, 6));
      f.source_id = "s" + std::to_string(pick(1, 9));
      if (chance(25)) f.entity_tag = any(tags_);
      text += " " + f.field + ": " + f.value + ".";
      b.facts.push_back(std::move(f));
    }
    b.text = std::move(text);
    if (!topic.empty() && chance(15)) {
      std::string other = any(topics_);
      if (other != topic) {
        Link l;
        l.other = TopicId{other};
        l.kind = chance(60) ? EdgeKind::Extension : EdgeKind::Association;
        l.outgoing = chance(50);
        b.links.push_back(std::move(l));
      }
    }
    return b;
  }

  Query random_query() {
    Query q;
    const int roll = pick(0, 99);
    const std::string topic = any(topics_);
    const std::string field = any(fields_);
    if (roll < 60) {
      q.text = "What is the " + field + " of " + topic + "?";
    } else if (roll < 75) {
      q.text = topic + "." + field;
      q.explicit_unit = UnitRef{TopicId{topic}, field};
    } else if (roll < 88) {
      q.text = field + " history of " + topic;
      q.mode = QueryMode::Historical;
      if (chance(50)) q.as_of = static_cast<std::uint64_t>(pick(0, 80));
    } else {
      q.text = "around " + topic;
      q.mode = QueryMode::Structural;
      q.root = TopicId{topic};
      q.depth = static_cast<std::size_t>(pick(1, 3));
    }
    return q;
  }

  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<std::string> topics_{"apollo", "borealis", "cascade", "dynamo", "ember", "fjord"};
  std::vector<std::string> fields_{"Deadline", "Launch", "Owner", "Status", "Budget", "Notes"};
  std::vector<std::string> values_{"March", "April", "Alice", "Bob", "green", "red", "draft", "final"};
  std::vector<std::string> tags_{"alice", "bob"};
  std::vector<std::string> chatter_{"Coffee machine broken again.", "Printer toner ordered.",
                                    "Parking closes early Friday.", "Security training in June."};
};

// Fixed seed set shared by the property tests and the acceptance binary.
inline std::vector<std::uint64_t> property_seeds(std::size_t count) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(count);
  std::mt19937_64 root(0x6e6d3a5eedULL);
  for (std::size_t i = 0; i < count; ++i) seeds.push_back(root());
  return seeds;
}

inline std::unique_ptr<Engine> run_generated(const GeneratedWorkload& w) {
  auto engine = std::make_unique<Engine>(w.config);
  for (const auto& e : w.events) engine->submit(e);
  return engine;
}

// Default probes for audits of generated workloads.
inline std::vector<Query> generated_probes() {
  return {text_query("What is the Deadline of apollo?"), text_query("Owner of cascade"),
          text_query("Status and Budget")};
}

// First `n` records rendered as JSON lines, for failure messages.
inline std::string journal_prefix(const Journal& j, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < j.records.size() && i < n; ++i) out += to_json(j.records[i]).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Random policies

class PolicyGenerator {
 public:
  explicit PolicyGenerator(std::uint64_t seed) : rng_(seed) {}

  Policy generate() {
    Policy p;
    p.name = word();
    p.on_event = static_cast<EventKind>(pick(0, 5));
    p.condition = condition(3);
    p.action = action();
    const int n = pick(0, 3);
    for (int i = 0; i < n; ++i) p.evidence.push_back(word());
    return p;
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  // [a-z][a-z0-9-]*, never a keyword.
  std::string word() {
    static const std::string tail = "abcdefghijklmnopqrstuvwxyz0123456789-";
    for (;;) {
      std::string w(1, static_cast<char>('a' + pick(0, 25)));
      const int len = pick(0, 10);
      for (int i = 0; i < len; ++i) w.push_back(tail[static_cast<std::size_t>(pick(0, 36))]);
      if (!is_keyword(w)) return w;
    }
  }

  static bool is_keyword(const std::string& w) {
    static const std::vector<std::string> kw = {"salience", "field", "beta", "evidence", "archive", "attenuate", "noop"};
    for (const auto& k : kw) {
      if (w == k) return true;
    }
    return false;
  }

  // [a-z0-9-_]+; rendered quoted.
  std::string topic_id() {
    static const std::string chars = "abcdefghijklmnopqrstuvwxyz0123456789-_";
    std::string w;
    const int len = pick(1, 12);
    for (int i = 0; i < len; ++i) w.push_back(chars[static_cast<std::size_t>(pick(0, 37))]);
    return w;
  }

  Target target() {
    if (pick(0, 2) == 0) return Target{topic_id()};
    return Target{static_cast<Variable>(pick(0, 5))};
  }

  double threshold() {
    switch (pick(0, 3)) {
      case 0: return 0.0;
      case 1: return static_cast<double>(pick(0, 100)) / 100.0;
      case 2: return std::uniform_real_distribution<double>(0.0, 5.0)(rng_);
      default: return std::ldexp(static_cast<double>(pick(1, 1000)), -pick(0, 30));
    }
  }

  std::string field_name() {
    static const std::vector<std::string> odd = {"Deadline", "due date", "x.y", "3rd", "a\"b", "OR", "1e5", "-x"};
    if (pick(0, 1) == 0) return odd[static_cast<std::size_t>(pick(0, static_cast<int>(odd.size()) - 1))];
    return word();
  }

  Condition condition(int depth) {
    const int leaf_kinds = 5;
    const int roll = depth > 0 ? pick(0, leaf_kinds + 2) : pick(0, leaf_kinds - 1);
    switch (roll) {
      case 0: return Condition::exists(static_cast<Variable>(pick(0, 5)));
      case 1: return Condition::salience_below(target(), threshold());
      case 2:
        if (pick(0, 1) == 0) return Condition::footprint_above(std::nullopt);
        return Condition::footprint_above(static_cast<std::uint64_t>(pick(0, 100000)));
      case 3: return Condition::field_is(field_name());
      case 4: return Condition::topic_archived(target());
      case 5: return Condition::negate(condition(depth - 1));
      case 6: return Condition::both(condition(depth - 1), condition(depth - 1));
      default: return Condition::either(condition(depth - 1), condition(depth - 1));
    }
  }

  Action action() {
    Action a;
    switch (pick(0, 4)) {
      case 0: a.kind = Action::Kind::Noop; break;
      case 1: {
        a.kind = Action::Kind::RejectTransition;
        static const std::string chars = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 -";
        const int len = pick(1, 20);
        for (int i = 0; i < len; ++i) a.message.push_back(chars[static_cast<std::size_t>(pick(0, 63))]);
        break;
      }
      case 2: a.kind = Action::Kind::FlagForRevision; a.target = target(); break;
      case 3: a.kind = Action::Kind::Attenuate; a.target = target(); break;
      default: a.kind = Action::Kind::Archive; a.target = target(); break;
    }
    return a;
  }

  std::mt19937_64 rng_;
};

}  // namespace gem::testing
