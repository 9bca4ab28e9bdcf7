#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gem/config.hpp"
#include "gem/delta.hpp"
#include "gem/inputs.hpp"
#include "gem/router.hpp"

namespace gem {

// A precondition failure inside an operator branch. The engine turns it into
// an aborted transition whose reason is what().
class OperatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OperatorContext {
  const EngineConfig& config;
  const Router& router;
  std::uint64_t now = 1;  // tick the transition will commit at
  double beta = 200.0;    // beta(n) for the interaction count after commit
};

// Proposed next state plus the deltas that produce it from the input.
struct Proposal {
  MemoryState state;
  std::vector<Delta> deltas;
};

struct RevisionRequest {
  std::optional<std::vector<EvidenceItem>> evidence;  // nullopt: detect automatically
  // Topics already repaired in the current propagation walk; a flag on one
  // of them is evaluated without being repaired again.
  std::set<TopicId> visited;
};

struct ForgetRequest {
  std::size_t headroom = 0;     // extra active slots to free below beta
  std::vector<UnitRef> protect;  // never hidden by the capacity step
};

// Annotation produced by the shift-annotation transform.
std::string shift_annotation(const std::string& dependent_value, const std::string& cause, const std::string& cause_value);

// Title for a topic created from raw interaction text.
std::string derive_title(const std::string& text);

void ingest(Transaction& tx, const FactBundle& bundle, const OperatorContext& ctx);
Proposal ingest(const MemoryState& state, const FactBundle& bundle, const OperatorContext& ctx);

std::vector<EvidenceItem> detect_evidence(const MemoryState& state, const EngineConfig& config);
// Evidence involving `topics` only (duplicates against any live topic).
std::vector<EvidenceItem> detect_evidence_for(const MemoryState& state, const EngineConfig& config,
                                              const std::set<TopicId>& topics);

void revise(Transaction& tx, const RevisionRequest& request, const OperatorContext& ctx);
Proposal revise(const MemoryState& state, const RevisionRequest& request, const OperatorContext& ctx);

void forget(Transaction& tx, const ForgetRequest& request, const OperatorContext& ctx);
Proposal forget(const MemoryState& state, const ForgetRequest& request, const OperatorContext& ctx);

// One decay step over every field.
void decay_tick(Transaction& tx, const OperatorContext& ctx);

// Read-only part of retrieval: what the query returns against `state`.
RetrievalOutput answer_query(const MemoryState& state, const Query& query, const EngineConfig& config);

// Answers plus the salience bump of every answered unit.
RetrievalOutput retrieve(Transaction& tx, const Query& query, const OperatorContext& ctx);
std::pair<RetrievalOutput, Proposal> retrieve(const MemoryState& state, const Query& query, const OperatorContext& ctx);

}  // namespace gem
