#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "gem/embedding.hpp"
#include "gem/policy.hpp"

namespace gem {

// Logical time. One tick per committed transition; wall is informational.
struct Timestamp {
  std::uint64_t tick = 0;
  std::optional<std::string> wall;

  friend bool operator==(const Timestamp& a, const Timestamp& b) { return a.tick == b.tick; }
  friend auto operator<=>(const Timestamp& a, const Timestamp& b) { return a.tick <=> b.tick; }
};

struct Provenance {
  std::string source_id;
  std::uint64_t event_id = 0;
  std::string excerpt;

  auto operator<=>(const Provenance&) const = default;
  bool operator==(const Provenance&) const = default;
};

// One value that a compression summary stands in for.
struct SummarizedValue {
  std::string value;
  Timestamp at;
  Provenance prov;

  bool operator==(const SummarizedValue& o) const {
    return value == o.value && at.tick == o.at.tick && prov == o.prov;
  }
};

struct ValueEntry {
  std::string value;
  Timestamp at;
  Provenance prov;
  bool superseded = false;
  bool compressed = false;
  // Non-empty only on compression summaries: every original entry replaced.
  std::vector<SummarizedValue> summarized;

  bool operator==(const ValueEntry& o) const {
    return value == o.value && at.tick == o.at.tick && prov == o.prov &&
           superseded == o.superseded && compressed == o.compressed && summarized == o.summarized;
  }
};

enum class Tier { Active, Compressed, Hidden };

const char* to_string(Tier t);
Tier tier_from_string(const std::string& s);

struct Field {
  std::string name;
  std::optional<std::string> entity_tag;
  std::vector<ValueEntry> history;
  double salience = 0.0;
  Tier tier = Tier::Active;
  std::uint64_t last_access = 0;
};

struct TopicId {
  std::string value;

  TopicId() = default;
  explicit TopicId(std::string v) : value(std::move(v)) {}

  auto operator<=>(const TopicId&) const = default;
  bool operator==(const TopicId&) const = default;
};

struct Topic {
  TopicId id;
  std::string title;
  std::string summary;
  EmbeddingVector embedding;
  std::map<std::string, Field> fields;
  bool archived = false;
  std::optional<TopicId> merged_into;
};

enum class EdgeKind { Extension, Association };

const char* to_string(EdgeKind k);
EdgeKind edge_kind_from_string(const std::string& s);

struct Edge {
  TopicId src;
  TopicId dst;
  EdgeKind kind = EdgeKind::Extension;
  Timestamp created_at;

  // Identity is the (src, dst, kind) triple.
  friend bool operator<(const Edge& a, const Edge& b) {
    return std::tie(a.src, a.dst, a.kind) < std::tie(b.src, b.dst, b.kind);
  }
  friend bool operator==(const Edge& a, const Edge& b) {
    return a.src == b.src && a.dst == b.dst && a.kind == b.kind;
  }
};

// A pending revision: `topic` must be re-evaluated because `cause_field` of
// `cause_topic` changed. Policy-raised flags without a field cause carry the
// policy name in cause_field and an empty cause_topic.
struct RevisionFlag {
  TopicId topic;
  TopicId cause_topic;
  std::string cause_field;

  auto operator<=>(const RevisionFlag&) const = default;
  bool operator==(const RevisionFlag&) const = default;
};

enum class MarkKind { Attenuate, Archive };

struct MemoryState {
  std::map<TopicId, Topic> topics;
  std::set<Edge> edges;
  std::vector<Policy> policies;
  Timestamp clock;
  // Committed client interactions (ingest + retrieve); the n of beta(n).
  std::uint64_t interactions = 0;
  std::set<RevisionFlag> revision_queue;
  std::map<TopicId, MarkKind> attenuation_marks;
};

}  // namespace gem
