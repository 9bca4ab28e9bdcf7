#include "gem/operators.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>

namespace gem {

namespace {

std::string slug(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (!out.empty() && out.back() != '-') {
      out.push_back('-');
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? std::string("topic") : out;
}

std::string pad_tick(std::uint64_t tick) {
  std::string s = std::to_string(tick);
  if (s.size() < 8) s.insert(0, 8 - s.size(), '0');
  return s;
}

TopicId fresh_id(const MemoryState& state, const std::string& base) {
  TopicId id{base};
  for (int k = 2; state.topics.count(id); ++k) id = TopicId{base + "-" + std::to_string(k)};
  return id;
}

const Topic& topic_ref(const MemoryState& s, const TopicId& id) {
  const Topic* t = find_topic(s, id);
  if (!t) throw OperatorError("unknown-unit: topic '" + id.value + "'");
  return *t;
}

// Flip every live entry except `keep` to superseded.
void supersede_all_but(Transaction& tx, const TopicId& topic, const std::string& field,
                       std::optional<std::size_t> keep) {
  const auto& h = tx.state().topics.at(topic).fields.at(field).history;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (keep && i == *keep) continue;
    if (!h[i].compressed && !h[i].superseded) tx.apply(delta::EntryFlagged{topic, field, i, true});
  }
}

// Make the newest non-compressed entry (last on ties) the only live one.
void settle_current(Transaction& tx, const TopicId& topic, const std::string& field) {
  const auto& h = tx.state().topics.at(topic).fields.at(field).history;
  std::optional<std::size_t> newest;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i].compressed) continue;
    if (!newest || h[i].at.tick >= h[*newest].at.tick) newest = i;
  }
  if (!newest) return;
  if (h[*newest].superseded) tx.apply(delta::EntryFlagged{topic, field, *newest, false});
  supersede_all_but(tx, topic, field, newest);
}

void bump_unit(Transaction& tx, const TopicId& topic, const std::string& field, const OperatorContext& ctx) {
  const Field& f = tx.state().topics.at(topic).fields.at(field);
  tx.apply(delta::SalienceChanged{topic, field, f.salience, bump(f.salience, ctx.config.salience.access_delta)});
  tx.apply(delta::FieldAccessed{topic, field, ctx.now});
}

std::vector<SummarizedValue> flatten(const std::vector<ValueEntry>& entries) {
  std::vector<SummarizedValue> out;
  for (const auto& e : entries) {
    if (!e.summarized.empty()) {
      out.insert(out.end(), e.summarized.begin(), e.summarized.end());
    } else {
      out.push_back(SummarizedValue{e.value, e.at, e.prov});
    }
  }
  return out;
}

std::set<std::string> token_set(const std::string& s) {
  auto tokens = tokenize(s);
  return {tokens.begin(), tokens.end()};
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::string normalized_name(const std::string& name) {
  std::string out;
  for (unsigned char c : name) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace

const char* to_string(QueryMode m) {
  switch (m) {
    case QueryMode::Default: return "default";
    case QueryMode::Historical: return "historical";
    case QueryMode::Structural: return "structural";
  }
  return "?";
}

QueryMode query_mode_from_string(const std::string& s) {
  if (s == "default") return QueryMode::Default;
  if (s == "historical") return QueryMode::Historical;
  if (s == "structural") return QueryMode::Structural;
  throw std::invalid_argument("unknown query mode '" + s + "'");
}

std::string shift_annotation(const std::string& dependent_value, const std::string& cause,
                             const std::string& cause_value) {
  static const std::string kMarker = " (needs review: ";
  std::string base = dependent_value;
  if (auto pos = base.find(kMarker); pos != std::string::npos) base.resize(pos);
  return base + kMarker + cause + " changed to " + cause_value + ")";
}

std::string derive_title(const std::string& text) {
  auto cut = text.find_first_of("|:\n");
  std::string head = text.substr(0, cut);
  auto b = head.find_first_not_of(" \t");
  auto e = head.find_last_not_of(" \t.");
  if (b != std::string::npos && e != std::string::npos && e >= b) return head.substr(b, e - b + 1);
  auto tokens = tokenize(text);
  if (tokens.empty()) return "untitled";
  std::string out;
  for (std::size_t i = 0; i < tokens.size() && i < 6; ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion

void ingest(Transaction& tx, const FactBundle& bundle, const OperatorContext& ctx) {
  if (bundle.facts.empty()) throw OperatorError("empty-bundle: a bundle needs at least one fact");
  for (const auto& f : bundle.facts) {
    if (f.field.empty()) throw OperatorError("empty-field-name: every fact needs a field name");
  }

  RouteDecision route;
  try {
    route = ctx.router.select_host(tx.state(), bundle, ctx.config);
  } catch (const RoutingError& e) {
    throw OperatorError(std::string("routing: ") + e.what());
  }

  TopicId host = route.topic;
  bool changed = false;
  if (!route.existing()) {
    if (host.value.empty()) host = fresh_id(tx.state(), "topic-" + pad_tick(ctx.now));
    tx.apply(delta::TopicCreated{host, derive_title(bundle.text), bundle.text});
    changed = true;
  }

  for (const auto& link : bundle.links) {
    if (!find_topic(tx.state(), link.other)) {
      throw OperatorError("unknown-link-target: topic '" + link.other.value + "'");
    }
    if (link.other == host) continue;
    Edge e{link.outgoing ? host : link.other, link.outgoing ? link.other : host, link.kind, Timestamp{ctx.now, {}}};
    if (!tx.state().edges.count(e)) tx.apply(delta::EdgeAdded{e});
  }

  const auto& p = ctx.config.salience;
  for (const auto& fact : bundle.facts) {
    ValueEntry entry;
    entry.value = fact.value;
    entry.at = Timestamp{ctx.now, {}};
    entry.prov = Provenance{fact.source_id, ctx.now, fact.excerpt.value_or(bundle.text)};

    const Field* existing = find_field(tx.state(), host, fact.field);
    if (!existing) {
      tx.apply(delta::FieldCreated{host, fact.field, fact.entity_tag, p.initial, Tier::Active, ctx.now});
      tx.apply(delta::EntryAppended{host, fact.field, entry});
      changed = true;
      continue;
    }
    auto cur = current_index(*existing);
    if (cur && existing->history[*cur].value == fact.value) {
      bump_unit(tx, host, fact.field, ctx);
    } else {
      supersede_all_but(tx, host, fact.field, std::nullopt);
      tx.apply(delta::EntryAppended{host, fact.field, entry});
      bump_unit(tx, host, fact.field, ctx);
      changed = true;
    }
    const Field& f = tx.state().topics.at(host).fields.at(fact.field);
    if (f.tier != Tier::Active) tx.apply(delta::TierChanged{host, fact.field, f.tier, Tier::Active});
  }
  if (changed) tx.apply(delta::EmbeddingRefreshed{host});
}

Proposal ingest(const MemoryState& state, const FactBundle& bundle, const OperatorContext& ctx) {
  Transaction tx(state);
  ingest(tx, bundle, ctx);
  auto deltas = tx.take_deltas();
  return {std::move(tx).take_state(), std::move(deltas)};
}

// ---------------------------------------------------------------------------
// Evidence detection

namespace {

void topic_evidence(const MemoryState& state, const EngineConfig& config, const Topic& topic,
                    std::vector<EvidenceItem>& out) {
  if (topic.archived) return;
  std::map<std::string, std::vector<std::string>> by_normal;
  for (const auto& [name, field] : topic.fields) {
    std::size_t live = 0;
    for (const auto& e : field.history) live += (!e.compressed && !e.superseded) ? 1 : 0;
    if (live > 1) out.push_back(evidence::ConflictingValues{topic.id, name});
    if (field.tier != Tier::Hidden) by_normal[normalized_name(name)].push_back(name);
  }
  for (const auto& [norm, names] : by_normal) {
    if (names.size() < 2 || norm.empty()) continue;
    for (std::size_t i = 1; i < names.size(); ++i) out.push_back(evidence::SchemaDrift{topic.id, names[i], names[0]});
  }

  std::map<std::string, std::pair<std::size_t, std::size_t>> tags;  // tag -> (fields, entries)
  bool untagged_or_other = false;
  std::size_t visible = 0;
  for (const auto& [name, field] : topic.fields) {
    if (field.tier == Tier::Hidden) continue;
    ++visible;
    if (!field.entity_tag) {
      untagged_or_other = true;
      continue;
    }
    auto& [n, m] = tags[*field.entity_tag];
    ++n;
    m += field.history.size();
  }
  for (const auto& [tag, counts] : tags) {
    bool others = untagged_or_other || tags.size() > 1 || counts.first < visible;
    if (counts.first >= config.n_promote && counts.second >= config.m_promote && others) {
      out.push_back(evidence::PromotionCandidate{topic.id, tag});
    }
  }
  (void)state;
}

bool duplicates(const Topic& a, const Topic& b, const EngineConfig& config, double& similarity) {
  similarity = cosine(a.embedding, b.embedding);
  return similarity >= config.tau_dup && jaccard(token_set(a.title), token_set(b.title)) >= 0.5;
}

}  // namespace

std::vector<EvidenceItem> detect_evidence(const MemoryState& state, const EngineConfig& config) {
  std::vector<EvidenceItem> out;
  for (const auto& flag : state.revision_queue) {
    out.push_back(evidence::DependencyFlag{flag.topic, flag.cause_topic, flag.cause_field});
  }
  for (const auto& [id, topic] : state.topics) topic_evidence(state, config, topic, out);
  for (auto a = state.topics.begin(); a != state.topics.end(); ++a) {
    if (a->second.archived) continue;
    for (auto b = std::next(a); b != state.topics.end(); ++b) {
      if (b->second.archived) continue;
      double sim = 0.0;
      if (duplicates(a->second, b->second, config, sim)) out.push_back(evidence::DuplicateTopics{a->first, b->first, sim});
    }
  }
  return out;
}

std::vector<EvidenceItem> detect_evidence_for(const MemoryState& state, const EngineConfig& config,
                                              const std::set<TopicId>& topics) {
  std::vector<EvidenceItem> out;
  for (const auto& id : topics) {
    if (const Topic* t = find_topic(state, id)) topic_evidence(state, config, *t, out);
  }
  std::set<std::pair<TopicId, TopicId>> seen;
  for (const auto& id : topics) {
    const Topic* t = find_topic(state, id);
    if (!t || t->archived) continue;
    for (const auto& [other_id, other] : state.topics) {
      if (other_id == id || other.archived) continue;
      auto key = std::minmax(id, other_id);
      if (!seen.insert({key.first, key.second}).second) continue;
      double sim = 0.0;
      if (duplicates(*t, other, config, sim)) out.push_back(evidence::DuplicateTopics{key.first, key.second, sim});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Revision

namespace {

void repair_dependency(Transaction& tx, const evidence::DependencyFlag& item, const RevisionRequest& request,
                       const OperatorContext& ctx) {
  for (const auto& flag : std::set<RevisionFlag>(tx.state().revision_queue)) {
    if (flag.topic == item.topic && flag.cause_topic == item.cause_topic && flag.cause_field == item.cause_field) {
      tx.apply(delta::RevisionFlagged{flag, false, std::nullopt});
    }
  }
  const Topic& dependent = topic_ref(tx.state(), item.topic);
  if (dependent.archived || request.visited.count(item.topic) || item.cause_topic.value.empty()) return;
  auto cause = lookup_current(tx.state(), item.cause_topic, item.cause_field);
  if (!cause) return;
  const std::string cause_name = item.cause_topic.value + "." + item.cause_field;

  bool changed = false;
  std::vector<std::string> names;
  for (const auto& [name, field] : dependent.fields) names.push_back(name);
  for (const auto& name : names) {
    bool applies = std::any_of(ctx.config.dependency_rules.begin(), ctx.config.dependency_rules.end(),
                               [&](const DependencyRule& r) {
                                 return r.transform == kShiftAnnotation &&
                                        r.matches_cause(item.cause_topic.value, item.cause_field) &&
                                        r.matches_dependent(item.topic.value, name) &&
                                        !(item.topic == item.cause_topic && name == item.cause_field);
                               });
    if (!applies) continue;
    auto current = lookup_current(tx.state(), item.topic, name);
    if (!current) continue;
    std::string next = shift_annotation(current->value, cause_name, cause->value);
    if (next == current->value) continue;
    supersede_all_but(tx, item.topic, name, std::nullopt);
    ValueEntry entry;
    entry.value = std::move(next);
    entry.at = Timestamp{ctx.now, {}};
    entry.prov = Provenance{"derived:" + cause_name, cause->at.tick, cause->value};
    tx.apply(delta::EntryAppended{item.topic, name, std::move(entry)});
    changed = true;
  }
  if (changed) tx.apply(delta::EmbeddingRefreshed{item.topic});
}

void copy_history_into(Transaction& tx, const TopicId& to, const std::string& field, const Field& from) {
  for (const auto& e : from.history) tx.apply(delta::EntryAppended{to, field, e});
  settle_current(tx, to, field);
}

void merge_topics(Transaction& tx, const evidence::DuplicateTopics& item, std::set<TopicId>& merged) {
  const Topic& a = topic_ref(tx.state(), item.a);
  const Topic& b = topic_ref(tx.state(), item.b);
  if (a.archived || b.archived) {
    throw OperatorError("merge-of-archived-topic: '" + (a.archived ? a.id.value : b.id.value) + "'");
  }
  if (merged.count(item.a) || merged.count(item.b)) return;
  const TopicId winner = std::min(item.a, item.b);
  const TopicId loser = std::max(item.a, item.b);

  const Topic loser_copy = tx.state().topics.at(loser);
  for (const auto& [name, lf] : loser_copy.fields) {
    const Field* wf = find_field(tx.state(), winner, name);
    if (!wf) {
      tx.apply(delta::FieldCreated{winner, name, lf.entity_tag, lf.salience, lf.tier, lf.last_access});
    } else {
      if (lf.salience > wf->salience) tx.apply(delta::SalienceChanged{winner, name, wf->salience, lf.salience});
      const Field& w2 = tx.state().topics.at(winner).fields.at(name);
      if (lf.last_access > w2.last_access) tx.apply(delta::FieldAccessed{winner, name, lf.last_access});
    }
    copy_history_into(tx, winner, name, lf);
  }

  std::vector<Edge> touching;
  for (const auto& e : tx.state().edges) {
    if (e.src == loser || e.dst == loser) touching.push_back(e);
  }
  for (const auto& e : touching) {
    tx.apply(delta::EdgeRemoved{e});
    Edge moved = e;
    if (moved.src == loser) moved.src = winner;
    if (moved.dst == loser) moved.dst = winner;
    if (moved.src != moved.dst && !tx.state().edges.count(moved)) tx.apply(delta::EdgeAdded{moved});
  }
  tx.apply(delta::TopicArchived{loser, true, winner});
  tx.apply(delta::EmbeddingRefreshed{winner});
  merged.insert(loser);
}

void resolve_drift(Transaction& tx, const evidence::SchemaDrift& item) {
  const Field* drifted = find_field(tx.state(), item.topic, item.field);
  const Field* canonical = find_field(tx.state(), item.topic, item.canonical);
  if (!drifted || !canonical || drifted->tier == Tier::Hidden) return;
  const Field copy = *drifted;
  copy_history_into(tx, item.topic, item.canonical, copy);
  tx.apply(delta::TierChanged{item.topic, item.field, copy.tier, Tier::Hidden});
  tx.apply(delta::EmbeddingRefreshed{item.topic});
}

void promote(Transaction& tx, const evidence::PromotionCandidate& item, const OperatorContext& ctx) {
  const Topic source = topic_ref(tx.state(), item.topic);
  if (source.archived) return;
  std::vector<const Field*> tagged;
  for (const auto& [name, field] : source.fields) {
    if (field.tier != Tier::Hidden && field.entity_tag == item.entity_tag) tagged.push_back(&field);
  }
  if (tagged.empty()) return;

  TopicId id{slug(item.entity_tag)};
  if (tx.state().topics.count(id)) id = fresh_id(tx.state(), id.value + "-" + pad_tick(ctx.now));
  tx.apply(delta::TopicCreated{id, item.entity_tag, "Split from " + source.title});
  for (const Field* f : tagged) {
    tx.apply(delta::FieldCreated{id, f->name, f->entity_tag, f->salience, f->tier, f->last_access});
    copy_history_into(tx, id, f->name, *f);
    tx.apply(delta::TierChanged{item.topic, f->name, f->tier, Tier::Hidden});
  }
  Edge e{item.topic, id, EdgeKind::Extension, Timestamp{ctx.now, {}}};
  if (!tx.state().edges.count(e)) tx.apply(delta::EdgeAdded{e});
  tx.apply(delta::EmbeddingRefreshed{id});
  tx.apply(delta::EmbeddingRefreshed{item.topic});
}

void resolve_conflict(Transaction& tx, const evidence::ConflictingValues& item) {
  if (!find_field(tx.state(), item.topic, item.field)) return;
  settle_current(tx, item.topic, item.field);
}

}  // namespace

void revise(Transaction& tx, const RevisionRequest& request, const OperatorContext& ctx) {
  const std::vector<EvidenceItem> items =
      request.evidence ? *request.evidence : detect_evidence(tx.state(), ctx.config);
  std::set<TopicId> merged;
  for (const auto& item : items) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, evidence::DependencyFlag>) {
            repair_dependency(tx, x, request, ctx);
          } else if constexpr (std::is_same_v<T, evidence::DuplicateTopics>) {
            merge_topics(tx, x, merged);
          } else if constexpr (std::is_same_v<T, evidence::SchemaDrift>) {
            topic_ref(tx.state(), x.topic);
            resolve_drift(tx, x);
          } else if constexpr (std::is_same_v<T, evidence::PromotionCandidate>) {
            promote(tx, x, ctx);
          } else {
            topic_ref(tx.state(), x.topic);
            resolve_conflict(tx, x);
          }
        },
        item);
  }
}

Proposal revise(const MemoryState& state, const RevisionRequest& request, const OperatorContext& ctx) {
  Transaction tx(state);
  revise(tx, request, ctx);
  auto deltas = tx.take_deltas();
  return {std::move(tx).take_state(), std::move(deltas)};
}

// ---------------------------------------------------------------------------
// Forgetting

namespace {

ValueEntry summarize(const std::vector<ValueEntry>& run, std::uint64_t now) {
  ValueEntry s;
  s.summarized = flatten(run);
  s.value = std::to_string(s.summarized.size()) + " earlier values (" + s.summarized.front().value + " … " +
            s.summarized.back().value + ")";
  s.at = run.back().at;
  s.prov = Provenance{"compression", now, ""};
  s.superseded = true;
  s.compressed = true;
  return s;
}

}  // namespace

void forget(Transaction& tx, const ForgetRequest& request, const OperatorContext& ctx) {
  const auto& p = ctx.config.salience;
  std::vector<TopicId> ids;
  for (const auto& [id, t] : tx.state().topics) {
    if (!t.archived) ids.push_back(id);
  }
  for (const auto& id : ids) {
    std::vector<std::string> names;
    for (const auto& [name, f] : tx.state().topics.at(id).fields) names.push_back(name);
    bool all_below_archive = !names.empty();
    for (const auto& name : names) {
      const Field& f = tx.state().topics.at(id).fields.at(name);
      const double s = f.salience;
      if (s >= p.theta_archive) all_below_archive = false;
      if (s < p.theta_summary && worth_compressing(f, p.k_recent)) {
        std::size_t count = compressible_prefix(f, p.k_recent);
        std::vector<ValueEntry> run(f.history.begin(), f.history.begin() + static_cast<std::ptrdiff_t>(count));
        tx.apply(delta::HistoryCompressed{id, name, count, summarize(run, ctx.now)});
      }
      const Field& f2 = tx.state().topics.at(id).fields.at(name);
      if (f2.tier == Tier::Hidden) continue;
      Tier target = ladder_tier(s, p);
      if (target != f2.tier) tx.apply(delta::TierChanged{id, name, f2.tier, target});
    }
    auto mark = tx.state().attenuation_marks.find(id);
    bool marked_archive = mark != tx.state().attenuation_marks.end() && mark->second == MarkKind::Archive;
    if (all_below_archive || marked_archive) tx.apply(delta::TopicArchived{id, true, std::nullopt});
  }
  std::vector<TopicId> marked;
  for (const auto& [id, kind] : tx.state().attenuation_marks) marked.push_back(id);
  for (const auto& id : marked) tx.apply(delta::MarkChanged{id, std::nullopt});

  // Relevance-ordered capacity step.
  const double limit_d = ctx.beta - static_cast<double>(request.headroom);
  const std::size_t limit = limit_d <= 0.0 ? 0 : static_cast<std::size_t>(limit_d);
  std::size_t footprint = active_footprint(tx.state());
  if (footprint <= limit) return;
  std::set<UnitRef> protect(request.protect.begin(), request.protect.end());
  for (const auto& unit : hide_order(tx.state())) {
    if (footprint <= limit) break;
    if (protect.count(unit)) continue;
    tx.apply(delta::TierChanged{unit.topic, unit.field, Tier::Active, Tier::Hidden});
    --footprint;
  }
}

Proposal forget(const MemoryState& state, const ForgetRequest& request, const OperatorContext& ctx) {
  Transaction tx(state);
  forget(tx, request, ctx);
  auto deltas = tx.take_deltas();
  return {std::move(tx).take_state(), std::move(deltas)};
}

void decay_tick(Transaction& tx, const OperatorContext& ctx) {
  const double lambda = ctx.config.salience.decay_factor;
  std::vector<std::pair<TopicId, std::string>> units;
  for (const auto& [id, t] : tx.state().topics) {
    for (const auto& [name, f] : t.fields) {
      if (f.salience != 0.0) units.emplace_back(id, name);
    }
  }
  for (const auto& [id, name] : units) {
    double s = tx.state().topics.at(id).fields.at(name).salience;
    tx.apply(delta::SalienceChanged{id, name, s, decay(s, 1, lambda)});
  }
}

// ---------------------------------------------------------------------------
// Retrieval

namespace {

std::vector<const Topic*> rank_topics(const MemoryState& state, const std::string& text, std::size_t k) {
  const EmbeddingVector q = embed(text);
  std::vector<std::pair<double, const Topic*>> scored;
  for (const auto& [id, t] : state.topics) {
    if (t.archived) continue;
    double c = cosine(q, t.embedding);
    if (c > 0.0) scored.emplace_back(c, &t);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<const Topic*> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].second);
  return out;
}

bool name_matches(const std::string& field, const std::set<std::string>& query_tokens) {
  for (const auto& t : tokenize(field)) {
    if (query_tokens.count(t)) return true;
  }
  return false;
}

void add_context(const MemoryState& state, const std::set<TopicId>& answered, RetrievalOutput& out) {
  std::set<TopicId> linked;
  for (const auto& e : state.edges) {
    if (e.kind != EdgeKind::Association) continue;
    if (answered.count(e.src) && !answered.count(e.dst)) linked.insert(e.dst);
    if (answered.count(e.dst) && !answered.count(e.src)) linked.insert(e.src);
  }
  for (const auto& id : linked) {
    const Topic& t = state.topics.at(id);
    if (!t.archived) out.context.push_back(ContextItem{id, t.title, t.summary});
  }
}

void historical_answers(const Topic& topic, const Field& field, std::uint64_t as_of, RetrievalOutput& out) {
  bool any = false;
  for (const auto& e : field.history) {
    std::vector<SummarizedValue> values =
        e.summarized.empty() ? std::vector<SummarizedValue>{{e.value, e.at, e.prov}} : e.summarized;
    for (const auto& v : values) {
      if (v.at.tick > as_of) continue;
      out.answers.push_back(Answer{topic.id, field.name, v.value, v.at, v.prov});
      any = true;
    }
  }
  if (any) out.accessed_units.push_back(UnitRef{topic.id, field.name});
}

}  // namespace

RetrievalOutput answer_query(const MemoryState& state, const Query& q, const EngineConfig& config) {
  RetrievalOutput out;
  if (q.explicit_unit) {
    const auto& u = *q.explicit_unit;
    const Field* f = find_field(state, u.topic, u.field);
    if (!f) throw OperatorError("unknown-unit: '" + u.topic.value + "." + u.field + "'");
    const Topic& t = state.topics.at(u.topic);
    if (q.mode == QueryMode::Historical) {
      historical_answers(t, *f, q.as_of.value_or(state.clock.tick), out);
    } else if (auto cv = lookup_current(state, u.topic, u.field)) {
      out.answers.push_back(Answer{u.topic, u.field, cv->value, cv->at, cv->prov});
      out.accessed_units.push_back(u);
    }
    return out;
  }

  if (q.mode == QueryMode::Structural) {
    if (!q.root) throw OperatorError("invalid-query: structural mode needs a root topic");
    if (!find_topic(state, *q.root)) throw OperatorError("unknown-unit: topic '" + q.root->value + "'");
    std::set<TopicId> seen{*q.root};
    std::deque<std::pair<TopicId, std::size_t>> frontier{{*q.root, 0}};
    while (!frontier.empty()) {
      auto [id, depth] = frontier.front();
      frontier.pop_front();
      const Topic& t = state.topics.at(id);
      out.context.push_back(ContextItem{id, t.title, t.summary});
      if (depth >= q.depth) continue;
      for (auto it = state.edges.lower_bound(Edge{id, TopicId{}, EdgeKind::Extension, {}});
           it != state.edges.end() && it->src == id; ++it) {
        if (seen.insert(it->dst).second) frontier.emplace_back(it->dst, depth + 1);
      }
    }
    return out;
  }

  const auto candidates = rank_topics(state, q.text, config.k_topics);
  const auto qtokens = token_set(q.text);
  std::set<TopicId> answered;
  for (const Topic* t : candidates) {
    for (const auto& [name, f] : t->fields) {
      if (!name_matches(name, qtokens)) continue;
      if (q.mode == QueryMode::Historical) {
        historical_answers(*t, f, q.as_of.value_or(state.clock.tick), out);
        continue;
      }
      if (f.tier == Tier::Hidden) continue;
      if (auto cv = current_value(state, t->id, name)) {
        out.answers.push_back(Answer{t->id, name, cv->value, cv->at, cv->prov});
        out.accessed_units.push_back(UnitRef{t->id, name});
        answered.insert(t->id);
      }
    }
  }
  if (q.mode == QueryMode::Default) add_context(state, answered, out);
  return out;
}

RetrievalOutput retrieve(Transaction& tx, const Query& q, const OperatorContext& ctx) {
  if (q.mode == QueryMode::Structural && q.depth < 1) throw OperatorError("invalid-query: depth must be at least 1");
  if (q.mode == QueryMode::Historical && q.as_of && *q.as_of > tx.state().clock.tick) {
    throw OperatorError("invalid-query: as_of is in the future");
  }
  RetrievalOutput out = answer_query(tx.state(), q, ctx.config);
  for (const auto& u : out.accessed_units) bump_unit(tx, u.topic, u.field, ctx);
  return out;
}

std::pair<RetrievalOutput, Proposal> retrieve(const MemoryState& state, const Query& q, const OperatorContext& ctx) {
  Transaction tx(state);
  RetrievalOutput out = retrieve(tx, q, ctx);
  auto deltas = tx.take_deltas();
  return {std::move(out), Proposal{std::move(tx).take_state(), std::move(deltas)}};
}

}  // namespace gem
