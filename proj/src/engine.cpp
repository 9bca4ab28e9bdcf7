#include "gem/engine.hpp"

#include <algorithm>

namespace gem {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

struct Trigger {
  EventKind kind;
  EventBindings bindings;
};

// Event instances raised by a proposal, in a fixed order.
std::vector<Trigger> triggers_of(const std::string& op, const std::vector<Delta>& deltas,
                                 const std::optional<RetrievalOutput>& output) {
  std::vector<Trigger> out;
  std::set<std::pair<TopicId, std::string>> updated;
  for (const auto& d : deltas) {
    if (const auto* x = std::get_if<delta::TopicCreated>(&d)) {
      out.push_back({EventKind::TopicCreated, {x->topic.value, std::nullopt, std::nullopt}});
    }
  }
  for (const auto& d : deltas) {
    if (const auto* x = std::get_if<delta::EntryAppended>(&d)) {
      if (x->entry.compressed || !updated.insert({x->topic, x->field}).second) continue;
      out.push_back({EventKind::FieldUpdated, {x->topic.value, x->field, std::nullopt}});
    }
  }
  for (const auto& d : deltas) {
    if (const auto* x = std::get_if<delta::TopicArchived>(&d)) {
      if (x->merged_into) out.push_back({EventKind::TopicMerged, {x->merged_into->value, std::nullopt, std::nullopt}});
    }
  }
  if (output) {
    std::set<TopicId> accessed;
    for (const auto& u : output->accessed_units) {
      if (accessed.insert(u.topic).second) {
        out.push_back({EventKind::RetrievalPerformed, {std::nullopt, std::nullopt, u.topic.value}});
      }
    }
  }
  if (op == "tick") out.push_back({EventKind::Tick, {}});
  return out;
}

// Deferred effect of a fired non-blocking action.
void enqueue_action(Transaction& tx, const Policy& p, const EvalContext& ctx) {
  const Action& a = p.action;
  if (a.kind == Action::Kind::Noop || a.kind == Action::Kind::RejectTransition) return;
  const auto targets = resolve_target(a.target, tx.state(), ctx);
  for (const auto& id_text : targets) {
    TopicId id{id_text};
    if (!find_topic(tx.state(), id)) continue;
    if (a.kind == Action::Kind::FlagForRevision) {
      RevisionFlag flag{id, TopicId{ctx.bindings.updated_topic.value_or("")},
                        ctx.bindings.updated_field.value_or(p.name)};
      if (flag.topic == flag.cause_topic || tx.state().revision_queue.count(flag)) continue;
      std::optional<EdgeKind> via;
      if (a.target.is_variable() && std::get<Variable>(a.target.ref) == Variable::DependentTopic) {
        via = EdgeKind::Extension;
      }
      tx.apply(delta::RevisionFlagged{flag, true, via});
    } else {
      const MarkKind kind = a.kind == Action::Kind::Archive ? MarkKind::Archive : MarkKind::Attenuate;
      auto it = tx.state().attenuation_marks.find(id);
      if (it != tx.state().attenuation_marks.end() && (it->second == kind || it->second == MarkKind::Archive)) continue;
      tx.apply(delta::MarkChanged{id, kind});
    }
  }
}

PolicyEvaluation log_entry(const Policy& p, const Trigger& t) {
  PolicyEvaluation e;
  e.policy = p.name;
  e.event = t.kind;
  e.bindings = t.bindings;
  e.evidence = p.evidence;
  return e;
}

}  // namespace

const char* operator_name(const EngineEvent& e) {
  return std::visit(overloaded{
                        [](const event::Ingest&) { return "ingest"; },
                        [](const event::Retrieve&) { return "retrieve"; },
                        [](const event::Revise&) { return "revise"; },
                        [](const event::Forget&) { return "forget"; },
                        [](const event::Tick&) { return "tick"; },
                    },
                    e);
}

bool is_interaction(std::string_view op) { return op == "ingest" || op == "retrieve"; }

void finish_commit(MemoryState& state, const TransitionRecord& record) {
  state.clock = Timestamp{*record.tick, std::nullopt};
  if (is_interaction(record.op)) ++state.interactions;
}

MemoryState genesis_state(const EngineConfig& config) {
  MemoryState s;
  s.policies = config.effective_policies();
  return s;
}

TransitionResult apply_event(const MemoryState& state, const EngineEvent& event, const EngineConfig& config,
                             const Router& router) {
  TransitionResult res;
  TransitionRecord& rec = res.record;
  rec.op = operator_name(event);
  rec.input = event;

  const std::uint64_t now = state.clock.tick + 1;
  const std::uint64_t n_after = state.interactions + (is_interaction(rec.op) ? 1 : 0);
  res.beta = config.beta.at(n_after);
  const OperatorContext ctx{config, router, now, res.beta};

  auto abort = [&](std::string reason) {
    rec.committed = false;
    rec.abort_reason = std::move(reason);
    rec.deltas.clear();
    rec.output.reset();
    res.next = state;
    return std::move(res);
  };

  Transaction tx(state);
  std::optional<RetrievalOutput> output;
  try {
    std::visit(overloaded{
                   [&](const event::Ingest& x) { ingest(tx, x.bundle, ctx); },
                   [&](const event::Retrieve& x) { output = retrieve(tx, x.query, ctx); },
                   [&](const event::Revise& x) { revise(tx, RevisionRequest{x.evidence, x.visited}, ctx); },
                   [&](const event::Forget& x) { forget(tx, ForgetRequest{x.headroom, x.protect}, ctx); },
                   [&](const event::Tick&) { decay_tick(tx, ctx); },
               },
               event);
  } catch (const OperatorError& e) {
    return abort(e.what());
  } catch (const RoutingError& e) {
    return abort(std::string("routing: ") + e.what());
  }

  // Non-blocking policies see the proposal and enqueue deferred effects.
  const auto triggers = triggers_of(rec.op, tx.deltas(), output);
  for (const auto& p : state.policies) {
    if (p.on_event == EventKind::PreCommit) continue;
    for (const auto& t : triggers) {
      if (t.kind != p.on_event) continue;
      PolicyEvaluation entry = log_entry(p, t);
      EvalContext ectx{config.salience, res.beta, t.bindings};
      try {
        entry.fired = evaluate_condition(p.condition, tx.state(), ectx);
        if (entry.fired) {
          entry.action = render_action(p.action);
          enqueue_action(tx, p, ectx);
        }
      } catch (const EvaluationError& e) {
        entry.error = e.what();
      }
      rec.policy_log.push_back(std::move(entry));
    }
  }

  // Postconditions: reject if any rejects.
  std::optional<std::string> rejection;
  const Trigger commit_point{EventKind::PreCommit, {}};
  for (const auto& p : state.policies) {
    if (p.on_event != EventKind::PreCommit) continue;
    PolicyEvaluation entry = log_entry(p, commit_point);
    EvalContext ectx{config.salience, res.beta, {}};
    try {
      entry.fired = evaluate_condition(p.condition, tx.state(), ectx);
      if (entry.fired) {
        entry.action = render_action(p.action);
        if (p.action.kind == Action::Kind::RejectTransition && !rejection) rejection = p.action.message;
      }
    } catch (const EvaluationError& e) {
      entry.error = e.what();
      if (!rejection) rejection = "policy-error: " + p.name + ": " + e.what();
    }
    rec.policy_log.push_back(std::move(entry));
  }

  res.proposed_footprint = active_footprint(tx.state());
  if (rejection) return abort(*rejection);

  rec.deltas = tx.take_deltas();
  rec.committed = true;
  rec.tick = now;
  rec.output = std::move(output);
  res.next = std::move(tx).take_state();
  finish_commit(res.next, rec);
  rec.digest_after = state_digest(res.next);
  return res;
}

MemoryState replay(const Journal& journal, const ReplayVisitor& visit) {
  MemoryState state = journal.genesis;
  std::uint64_t expected = state.clock.tick + 1;
  for (std::size_t i = 0; i < journal.records.size(); ++i) {
    const TransitionRecord& rec = journal.records[i];
    if (!rec.committed) continue;
    if (!rec.tick || *rec.tick != expected) {
      throw CorruptionError("non-consecutive tick at record " + std::to_string(i) + ": expected " +
                                std::to_string(expected),
                            expected);
    }
    MemoryState before;
    if (visit) before = state;
    try {
      for (const auto& d : rec.deltas) apply_delta(state, d);
    } catch (const std::logic_error& e) {
      throw CorruptionError("delta does not apply at tick " + std::to_string(expected) + ": " + e.what(), expected);
    }
    finish_commit(state, rec);
    if (!rec.digest_after || state_digest(state) != *rec.digest_after) {
      throw CorruptionError("digest mismatch at tick " + std::to_string(expected), expected);
    }
    if (visit) visit(rec, i, before, state);
    ++expected;
  }
  return state;
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(EngineConfig config, std::shared_ptr<const Router> router)
    : router_(router ? std::move(router) : std::make_shared<EmbeddingRouter>()) {
  validate(config);
  journal_.system = "gem";
  journal_.genesis = genesis_state(config);
  journal_.config = std::move(config);
  state_ = journal_.genesis;
}

void Engine::record(TransitionResult& result) {
  journal_.records.push_back(result.record);
  if (result.record.committed) state_ = result.next;
}

TransitionResult Engine::apply(const EngineEvent& event) {
  TransitionResult r = apply_event(state_, event, journal_.config, *router_);
  record(r);
  return r;
}

SubmitOutcome Engine::submit(const EngineEvent& event) {
  if (const auto* ingest_ev = std::get_if<event::Ingest>(&event)) return submit_ingest(*ingest_ev);

  if (std::holds_alternative<event::Retrieve>(event) && !drain_revisions()) {
    TransitionRecord rec;
    rec.op = "retrieve";
    rec.input = event;
    rec.abort_reason = "revision-pending";
    journal_.records.push_back(rec);
    return SubmitOutcome{false, rec.abort_reason, std::nullopt};
  }

  TransitionResult r = apply(event);
  SubmitOutcome out{r.record.committed, r.record.abort_reason, r.record.output};
  if (r.record.committed && std::holds_alternative<event::Tick>(event) && !state_.attenuation_marks.empty()) {
    apply(event::Forget{});
  }
  return out;
}

SubmitOutcome Engine::submit_ingest(const event::Ingest& ev) {
  TransitionResult r = apply_event(state_, ev, journal_.config, *router_);
  if (!r.record.committed && r.proposed_footprint > r.beta) {
    // Make room first: a relevance-ordered forget sized to the overflow.
    const std::size_t current = active_footprint(state_);
    event::Forget relief;
    relief.headroom = r.proposed_footprint > current ? r.proposed_footprint - current : 0;
    try {
      RouteDecision route = router_->select_host(state_, ev.bundle, journal_.config);
      for (const auto& f : ev.bundle.facts) relief.protect.push_back(UnitRef{route.topic, f.field});
    } catch (const RoutingError&) {
    }
    apply(relief);
    r = apply_event(state_, ev, journal_.config, *router_);
  }
  record(r);
  SubmitOutcome out{r.record.committed, r.record.abort_reason, std::nullopt};
  if (!r.record.committed) return out;

  std::set<TopicId> touched;
  for (const auto& d : r.record.deltas) {
    if (const auto* x = std::get_if<delta::EntryAppended>(&d)) touched.insert(x->topic);
    if (const auto* x = std::get_if<delta::TopicCreated>(&d)) touched.insert(x->topic);
  }
  auto items = detect_evidence_for(state_, journal_.config, touched);
  if (!items.empty()) apply(event::Revise{std::move(items), {}});
  return out;
}

bool Engine::drain_revisions() {
  std::set<TopicId> visited;
  while (!state_.revision_queue.empty()) {
    const TopicId topic = state_.revision_queue.begin()->topic;
    std::vector<EvidenceItem> items;
    for (const auto& f : state_.revision_queue) {
      if (f.topic == topic) items.push_back(evidence::DependencyFlag{f.topic, f.cause_topic, f.cause_field});
    }
    TransitionResult r = apply(event::Revise{std::move(items), visited});
    if (!r.record.committed) return false;
    visited.insert(topic);
  }
  return true;
}

}  // namespace gem
