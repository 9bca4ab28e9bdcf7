#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "gem/engine.hpp"

namespace gem {

// Where a record's content sits in the logical topic/field view the
// auditor reads. Not used by the store's own semantics.
struct RecordTag {
  TopicId topic;
  std::string field;
  std::string value;
  std::string source_id;
};

struct Record {
  std::uint64_t id = 0;
  std::string text;
  EmbeddingVector embedding;
  Timestamp created_at;
  RecordTag tag;
};

struct PutResult {
  std::uint64_t id = 0;
  std::vector<Record> evicted;
};

// Append-only record store with FIFO capacity eviction and pure reads.
class CrudStore {
 public:
  explicit CrudStore(std::size_t capacity);

  PutResult put(std::string text, Timestamp at, RecordTag tag = {});

  // Top-k by cosine, descending; ties keep insertion order. Records with
  // zero similarity are not returned.
  std::vector<Record> query(std::string_view text, std::size_t k) const;

  const std::deque<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  Digest digest() const;

 private:
  std::size_t capacity_;
  std::uint64_t next_id_ = 1;
  std::deque<Record> records_;
};

// Drives a CrudStore from engine events and journals it like the engine,
// so the same auditor can score it. Each stored fact is mirrored as an
// appended entry of its logical unit; evictions become removal deltas.
class BaselineAdapter {
 public:
  explicit BaselineAdapter(EngineConfig config);

  SubmitOutcome submit(const EngineEvent& event);

  const Journal& journal() const { return journal_; }
  const MemoryState& state() const { return mirror_; }
  const CrudStore& store() const { return store_; }

 private:
  SubmitOutcome commit(TransitionRecord rec, std::optional<RetrievalOutput> output);

  Journal journal_;
  MemoryState mirror_;
  CrudStore store_;
};

}  // namespace gem
