#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gem/types.hpp"

namespace gem {

// Primitive state changes. Every mutation of a MemoryState goes through
// apply_delta, so a transition's delta list replays it exactly.
namespace delta {

struct TopicCreated {
  TopicId topic;
  std::string title;
  std::string summary;
};

struct FieldCreated {
  TopicId topic;
  std::string field;
  std::optional<std::string> entity_tag;
  double salience = 0.0;
  Tier tier = Tier::Active;
  std::uint64_t last_access = 0;
};

struct EntryAppended {
  TopicId topic;
  std::string field;
  ValueEntry entry;
};

struct EntryFlagged {
  TopicId topic;
  std::string field;
  std::size_t index = 0;
  bool superseded = true;
};

// Replaces history[0, count) with `summary`.
struct HistoryCompressed {
  TopicId topic;
  std::string field;
  std::size_t count = 0;
  ValueEntry summary;
};

struct SalienceChanged {
  TopicId topic;
  std::string field;
  double from = 0.0;
  double to = 0.0;
};

struct FieldAccessed {
  TopicId topic;
  std::string field;
  std::uint64_t tick = 0;
};

struct TierChanged {
  TopicId topic;
  std::string field;
  Tier from = Tier::Active;
  Tier to = Tier::Active;
};

struct TopicArchived {
  TopicId topic;
  bool archived = true;
  std::optional<TopicId> merged_into;
};

struct EdgeAdded {
  Edge edge;
};

struct EdgeRemoved {
  Edge edge;
};

struct EmbeddingRefreshed {
  TopicId topic;
};

// `via` names the edge kind a propagation step traversed, when any.
struct RevisionFlagged {
  RevisionFlag flag;
  bool added = true;
  std::optional<EdgeKind> via;
};

struct MarkChanged {
  TopicId topic;
  std::optional<MarkKind> mark;  // nullopt clears
};

// Destructive deltas. Only the CRUD baseline adapter emits these.
struct EntryRemoved {
  TopicId topic;
  std::string field;
  std::size_t index = 0;
};

struct FieldRemoved {
  TopicId topic;
  std::string field;
};

}  // namespace delta

using Delta = std::variant<delta::TopicCreated, delta::FieldCreated, delta::EntryAppended, delta::EntryFlagged,
                           delta::HistoryCompressed, delta::SalienceChanged, delta::FieldAccessed, delta::TierChanged,
                           delta::TopicArchived, delta::EdgeAdded, delta::EdgeRemoved, delta::EmbeddingRefreshed,
                           delta::RevisionFlagged, delta::MarkChanged, delta::EntryRemoved, delta::FieldRemoved>;

const char* delta_kind(const Delta& d);

// Throws std::logic_error when the delta does not fit the state.
void apply_delta(MemoryState& state, const Delta& d);

// Embedding over title, summary and every field's current value.
EmbeddingVector compute_topic_embedding(const Topic& topic);

// Collects deltas while applying them to a working copy.
class Transaction {
 public:
  explicit Transaction(MemoryState base) : state_(std::move(base)) {}
  Transaction(MemoryState proposed, std::vector<Delta> deltas)
      : state_(std::move(proposed)), deltas_(std::move(deltas)) {}

  const MemoryState& state() const { return state_; }
  const std::vector<Delta>& deltas() const { return deltas_; }

  void apply(Delta d) {
    apply_delta(state_, d);
    deltas_.push_back(std::move(d));
  }

  MemoryState take_state() && { return std::move(state_); }
  std::vector<Delta> take_deltas() { return std::move(deltas_); }

 private:
  MemoryState state_;
  std::vector<Delta> deltas_;
};

}  // namespace gem
