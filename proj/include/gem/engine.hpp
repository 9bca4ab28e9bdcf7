#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gem/config.hpp"
#include "gem/delta.hpp"
#include "gem/inputs.hpp"
#include "gem/operators.hpp"
#include "gem/router.hpp"
#include "gem/state.hpp"

namespace gem {

namespace event {

struct Ingest {
  FactBundle bundle;
};

struct Retrieve {
  Query query;
};

struct Revise {
  std::optional<std::vector<EvidenceItem>> evidence;  // nullopt: detect automatically
  std::set<TopicId> visited;
};

struct Forget {
  std::size_t headroom = 0;
  std::vector<UnitRef> protect;
};

struct Tick {};

}  // namespace event

using EngineEvent = std::variant<event::Ingest, event::Retrieve, event::Revise, event::Forget, event::Tick>;

// "ingest", "retrieve", "revise", "forget" or "tick".
const char* operator_name(const EngineEvent& e);

// Ingest and retrieve are client interactions; they advance n in beta(n).
bool is_interaction(std::string_view op);

struct PolicyEvaluation {
  std::string policy;
  EventKind event = EventKind::PreCommit;
  EventBindings bindings;
  bool fired = false;
  std::string action;  // rendered action, empty when it did not fire
  std::vector<std::string> evidence;
  std::optional<std::string> error;
};

struct TransitionRecord {
  std::optional<std::uint64_t> tick;  // nullopt on abort
  std::string op;
  EngineEvent input;
  std::vector<Delta> deltas;
  std::vector<PolicyEvaluation> policy_log;
  bool committed = false;
  std::string abort_reason;
  std::optional<RetrievalOutput> output;
  std::optional<Digest> digest_after;  // committed only
};

struct TransitionResult {
  MemoryState next;  // the input state when aborted
  TransitionRecord record;
  std::size_t proposed_footprint = 0;
  double beta = 0.0;
};

// One transaction: dispatch, policy evaluation over the proposal, then
// commit or abort. Never throws for operator failures; they abort.
TransitionResult apply_event(const MemoryState& state, const EngineEvent& event, const EngineConfig& config,
                             const Router& router);

// Clock and interaction bookkeeping applied at commit, shared with replay.
void finish_commit(MemoryState& state, const TransitionRecord& record);

inline constexpr std::uint32_t kJournalVersion = 1;

struct Journal {
  std::string system = "gem";  // or "crud-baseline"
  EngineConfig config;
  MemoryState genesis;
  std::vector<TransitionRecord> records;
};

class CorruptionError : public std::runtime_error {
 public:
  CorruptionError(const std::string& message, std::optional<std::uint64_t> tick = std::nullopt)
      : std::runtime_error(message), tick_(tick) {}
  std::optional<std::uint64_t> tick() const { return tick_; }

 private:
  std::optional<std::uint64_t> tick_;
};

// Called once per committed record with the states around it.
using ReplayVisitor =
    std::function<void(const TransitionRecord& record, std::size_t index, const MemoryState& before,
                       const MemoryState& after)>;

// Re-applies every committed record from genesis, checking tick continuity
// and each digest_after. Throws CorruptionError at the first divergence.
MemoryState replay(const Journal& journal, const ReplayVisitor& visit = {});

// Genesis state for a config: empty topic graph carrying the policy set.
MemoryState genesis_state(const EngineConfig& config);

struct SubmitOutcome {
  bool committed = false;
  std::string abort_reason;
  std::optional<RetrievalOutput> output;
};

// Single-writer engine. submit() runs the maintenance schedule around each
// client event; apply() runs exactly one transition.
class Engine {
 public:
  explicit Engine(EngineConfig config, std::shared_ptr<const Router> router = nullptr);

  const MemoryState& state() const { return state_; }
  const Journal& journal() const { return journal_; }
  const EngineConfig& config() const { return journal_.config; }

  TransitionResult apply(const EngineEvent& event);
  SubmitOutcome submit(const EngineEvent& event);

 private:
  void record(TransitionResult& result);
  SubmitOutcome submit_ingest(const event::Ingest& ev);
  bool drain_revisions();

  std::shared_ptr<const Router> router_;
  Journal journal_;
  MemoryState state_;
};

}  // namespace gem
