#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gem/state.hpp"
#include "gem/types.hpp"

namespace gem {

struct Fact {
  std::string field;
  std::string value;
  std::optional<std::string> entity_tag;
  std::string source_id;
  std::optional<std::string> excerpt;  // defaults to the bundle text

  bool operator==(const Fact&) const = default;
};

// An edge between the host topic and an existing topic, declared alongside
// the facts. outgoing = true means host -> other.
struct Link {
  TopicId other;
  EdgeKind kind = EdgeKind::Extension;
  bool outgoing = true;

  bool operator==(const Link&) const = default;
};

struct FactBundle {
  std::vector<Fact> facts;
  std::string text;
  std::optional<TopicId> topic_hint;
  std::vector<Link> links;

  bool operator==(const FactBundle&) const = default;
};

enum class QueryMode { Default, Historical, Structural };

const char* to_string(QueryMode m);
QueryMode query_mode_from_string(const std::string& s);

struct Query {
  std::string text;
  QueryMode mode = QueryMode::Default;
  std::optional<std::uint64_t> as_of;  // Historical; defaults to the current tick
  std::optional<TopicId> root;         // Structural
  std::size_t depth = 1;               // Structural
  std::optional<UnitRef> explicit_unit;

  bool operator==(const Query&) const = default;
};

struct Answer {
  TopicId topic;
  std::string field;
  std::string value;
  Timestamp at;
  Provenance prov;
};

struct ContextItem {
  TopicId topic;
  std::string title;
  std::string summary;
};

struct RetrievalOutput {
  std::vector<Answer> answers;
  std::vector<UnitRef> accessed_units;
  std::vector<ContextItem> context;
};

namespace evidence {

struct DuplicateTopics {
  TopicId a;
  TopicId b;
  double similarity = 0.0;
};

struct ConflictingValues {
  TopicId topic;
  std::string field;
};

// `field` differs from `canonical` only in case or punctuation.
struct SchemaDrift {
  TopicId topic;
  std::string field;
  std::string canonical;
};

struct DependencyFlag {
  TopicId topic;
  TopicId cause_topic;
  std::string cause_field;
};

struct PromotionCandidate {
  TopicId topic;
  std::string entity_tag;
};

}  // namespace evidence

using EvidenceItem = std::variant<evidence::DuplicateTopics, evidence::ConflictingValues, evidence::SchemaDrift,
                                  evidence::DependencyFlag, evidence::PromotionCandidate>;

}  // namespace gem
