#include "gem/serialize.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace gem {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Json opt_str(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

std::optional<std::string> opt_str_from(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

std::optional<TopicId> opt_topic_from(const Json& j, const char* key) {
  auto s = opt_str_from(j, key);
  if (!s) return std::nullopt;
  return TopicId{*s};
}

Json ts_json(const Timestamp& t) {
  if (!t.wall) return t.tick;
  return Json{{"tick", t.tick}, {"wall", *t.wall}};
}

Timestamp ts_from(const Json& j) {
  if (j.is_number()) return Timestamp{j.get<std::uint64_t>(), std::nullopt};
  return Timestamp{j.at("tick").get<std::uint64_t>(), opt_str_from(j, "wall")};
}

Json prov_json(const Provenance& p) {
  return Json{{"source", p.source_id}, {"event", p.event_id}, {"excerpt", p.excerpt}};
}

Provenance prov_from(const Json& j) {
  return Provenance{j.at("source").get<std::string>(), j.at("event").get<std::uint64_t>(),
                    j.at("excerpt").get<std::string>()};
}

Json entry_json(const ValueEntry& e) {
  Json j{{"value", e.value},
         {"at", ts_json(e.at)},
         {"prov", prov_json(e.prov)},
         {"superseded", e.superseded},
         {"compressed", e.compressed}};
  if (!e.summarized.empty()) {
    Json list = Json::array();
    for (const auto& s : e.summarized) {
      list.push_back(Json{{"value", s.value}, {"at", ts_json(s.at)}, {"prov", prov_json(s.prov)}});
    }
    j["summarized"] = std::move(list);
  }
  return j;
}

ValueEntry entry_from(const Json& j) {
  ValueEntry e;
  e.value = j.at("value").get<std::string>();
  e.at = ts_from(j.at("at"));
  e.prov = prov_from(j.at("prov"));
  e.superseded = j.at("superseded").get<bool>();
  e.compressed = j.at("compressed").get<bool>();
  if (j.contains("summarized")) {
    for (const auto& s : j.at("summarized")) {
      e.summarized.push_back(SummarizedValue{s.at("value").get<std::string>(), ts_from(s.at("at")), prov_from(s.at("prov"))});
    }
  }
  return e;
}

Json edge_json(const Edge& e) {
  return Json{{"src", e.src.value}, {"dst", e.dst.value}, {"kind", to_string(e.kind)}, {"created_at", ts_json(e.created_at)}};
}

Edge edge_from(const Json& j) {
  return Edge{TopicId{j.at("src").get<std::string>()}, TopicId{j.at("dst").get<std::string>()},
              edge_kind_from_string(j.at("kind").get<std::string>()), ts_from(j.at("created_at"))};
}

// Sparse: only non-zero components, as [index, value] pairs.
Json embedding_json(const EmbeddingVector& v) {
  Json out = Json::array();
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
    if (v[i] != 0.0) out.push_back(Json::array({i, v[i]}));
  }
  return out;
}

EmbeddingVector embedding_from(const Json& j) {
  std::array<double, kEmbeddingDim> c{};
  for (const auto& pair : j) {
    auto i = pair.at(0).get<std::size_t>();
    if (i >= kEmbeddingDim) throw std::invalid_argument("embedding index out of range");
    c[i] = pair.at(1).get<double>();
  }
  return EmbeddingVector(c);
}

Json flag_json(const RevisionFlag& f) {
  return Json{{"topic", f.topic.value}, {"cause_topic", f.cause_topic.value}, {"cause_field", f.cause_field}};
}

RevisionFlag flag_from(const Json& j) {
  return RevisionFlag{TopicId{j.at("topic").get<std::string>()}, TopicId{j.at("cause_topic").get<std::string>()},
                      j.at("cause_field").get<std::string>()};
}

const char* mark_name(MarkKind k) { return k == MarkKind::Archive ? "archive" : "attenuate"; }

MarkKind mark_from(const std::string& s) {
  if (s == "archive") return MarkKind::Archive;
  if (s == "attenuate") return MarkKind::Attenuate;
  throw std::invalid_argument("unknown mark '" + s + "'");
}

Json unit_json(const UnitRef& u) { return Json{{"topic", u.topic.value}, {"field", u.field}}; }

UnitRef unit_from(const Json& j) { return UnitRef{TopicId{j.at("topic").get<std::string>()}, j.at("field").get<std::string>()}; }

Json bindings_json(const EventBindings& b) {
  Json j = Json::object();
  if (b.updated_topic) j["updated_topic"] = *b.updated_topic;
  if (b.updated_field) j["updated_field"] = *b.updated_field;
  if (b.accessed_topic) j["accessed_topic"] = *b.accessed_topic;
  return j;
}

EventBindings bindings_from(const Json& j) {
  return EventBindings{opt_str_from(j, "updated_topic"), opt_str_from(j, "updated_field"),
                       opt_str_from(j, "accessed_topic")};
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

  std::optional<std::uint32_t> u32() {
    if (bytes_.size() - pos_ < 4) return std::nullopt;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::optional<std::string_view> take(std::size_t n) {
    if (bytes_.size() - pos_ < n) return std::nullopt;
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_block(std::string& out, const std::string& payload) {
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  out += payload;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

Json salience_params_to_json(const SalienceParams& p) {
  return Json{{"s0", p.initial},
              {"access_delta", p.access_delta},
              {"lambda", p.decay_factor},
              {"theta_summary", p.theta_summary},
              {"theta_remove", p.theta_remove},
              {"theta_archive", p.theta_archive},
              {"k_recent", p.k_recent}};
}

SalienceParams salience_params_from_json(const Json& j) {
  static const std::set<std::string> kKeys = {"s0",           "access_delta",  "lambda",  "theta_summary",
                                              "theta_remove", "theta_archive", "k_recent"};
  if (!j.is_object()) throw ConfigError("salience must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.count(key)) throw ConfigError("unknown salience key '" + key + "'");
  }
  SalienceParams p;
  p.initial = j.value("s0", p.initial);
  p.access_delta = j.value("access_delta", p.access_delta);
  p.decay_factor = j.value("lambda", p.decay_factor);
  p.theta_summary = j.value("theta_summary", p.theta_summary);
  p.theta_remove = j.value("theta_remove", p.theta_remove);
  p.theta_archive = j.value("theta_archive", p.theta_archive);
  p.k_recent = j.value("k_recent", p.k_recent);
  return p;
}

Json beta_to_json(const BetaSpec& b) { return Json{{"constant", b.constant}, {"slope", b.slope}}; }

BetaSpec beta_from_json(const Json& j) {
  if (j.is_number()) return BetaSpec{j.get<double>(), 0.0};
  if (!j.is_object()) throw ConfigError("beta must be a number or {constant, slope}");
  for (const auto& [key, value] : j.items()) {
    if (key != "constant" && key != "slope") throw ConfigError("unknown beta key '" + key + "'");
  }
  BetaSpec b;
  b.constant = j.value("constant", b.constant);
  b.slope = j.value("slope", b.slope);
  return b;
}

Json config_to_json(const EngineConfig& c) {
  Json j{{"salience", salience_params_to_json(c.salience)},
         {"tau_topic", c.tau_topic},
         {"tau_dup", c.tau_dup},
         {"k_topics", c.k_topics},
         {"beta", beta_to_json(c.beta)},
         {"n_promote", c.n_promote},
         {"m_promote", c.m_promote},
         {"baseline_capacity", c.baseline_capacity}};
  if (!c.policies.empty()) {
    std::string text;
    for (const auto& p : c.policies) text += render_policy(p) + "\n";
    j["policies"] = text;
  }
  if (!c.dependency_rules.empty()) j["dependency_rules_text"] = render_dependency_rules(c.dependency_rules);
  return j;
}

EngineConfig config_from_json(const Json& j) { return config_from_json_text(j.dump(), std::filesystem::path{}); }

// ---------------------------------------------------------------------------
// State

Json to_json(const MemoryState& s) {
  Json topics = Json::array();
  for (const auto& [id, t] : s.topics) {
    Json fields = Json::array();
    for (const auto& [name, f] : t.fields) {
      Json history = Json::array();
      for (const auto& e : f.history) history.push_back(entry_json(e));
      fields.push_back(Json{{"name", f.name},
                            {"entity_tag", opt_str(f.entity_tag)},
                            {"history", std::move(history)},
                            {"salience", f.salience},
                            {"tier", to_string(f.tier)},
                            {"last_access", f.last_access}});
    }
    topics.push_back(Json{{"id", id.value},
                          {"title", t.title},
                          {"summary", t.summary},
                          {"embedding", embedding_json(t.embedding)},
                          {"fields", std::move(fields)},
                          {"archived", t.archived},
                          {"merged_into", t.merged_into ? Json(t.merged_into->value) : Json(nullptr)}});
  }
  Json edges = Json::array();
  for (const auto& e : s.edges) edges.push_back(edge_json(e));
  Json policies = Json::array();
  for (const auto& p : s.policies) policies.push_back(render_policy(p));
  Json queue = Json::array();
  for (const auto& f : s.revision_queue) queue.push_back(flag_json(f));
  Json marks = Json::array();
  for (const auto& [id, k] : s.attenuation_marks) marks.push_back(Json{{"topic", id.value}, {"mark", mark_name(k)}});
  return Json{{"topics", std::move(topics)},   {"edges", std::move(edges)},
              {"policies", std::move(policies)}, {"clock", ts_json(s.clock)},
              {"interactions", s.interactions},  {"revision_queue", std::move(queue)},
              {"marks", std::move(marks)}};
}

MemoryState state_from_json(const Json& j) {
  MemoryState s;
  for (const auto& tj : j.at("topics")) {
    Topic t;
    t.id = TopicId{tj.at("id").get<std::string>()};
    t.title = tj.at("title").get<std::string>();
    t.summary = tj.at("summary").get<std::string>();
    t.embedding = embedding_from(tj.at("embedding"));
    t.archived = tj.at("archived").get<bool>();
    t.merged_into = opt_topic_from(tj, "merged_into");
    for (const auto& fj : tj.at("fields")) {
      Field f;
      f.name = fj.at("name").get<std::string>();
      f.entity_tag = opt_str_from(fj, "entity_tag");
      for (const auto& ej : fj.at("history")) f.history.push_back(entry_from(ej));
      f.salience = fj.at("salience").get<double>();
      f.tier = tier_from_string(fj.at("tier").get<std::string>());
      f.last_access = fj.at("last_access").get<std::uint64_t>();
      t.fields.emplace(f.name, std::move(f));
    }
    s.topics.emplace(t.id, std::move(t));
  }
  for (const auto& ej : j.at("edges")) s.edges.insert(edge_from(ej));
  for (const auto& pj : j.at("policies")) s.policies.push_back(parse_policy(pj.get<std::string>()));
  s.clock = ts_from(j.at("clock"));
  s.interactions = j.at("interactions").get<std::uint64_t>();
  for (const auto& fj : j.at("revision_queue")) s.revision_queue.insert(flag_from(fj));
  for (const auto& mj : j.at("marks")) {
    s.attenuation_marks[TopicId{mj.at("topic").get<std::string>()}] = mark_from(mj.at("mark").get<std::string>());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Inputs and outputs

Json to_json(const FactBundle& b) {
  Json facts = Json::array();
  for (const auto& f : b.facts) {
    Json fj{{"field", f.field}, {"value", f.value}, {"source", f.source_id}};
    if (f.entity_tag) fj["entity_tag"] = *f.entity_tag;
    if (f.excerpt) fj["excerpt"] = *f.excerpt;
    facts.push_back(std::move(fj));
  }
  Json links = Json::array();
  for (const auto& l : b.links) {
    links.push_back(Json{{"other", l.other.value}, {"kind", to_string(l.kind)}, {"outgoing", l.outgoing}});
  }
  Json j{{"text", b.text}, {"facts", std::move(facts)}, {"links", std::move(links)}};
  if (b.topic_hint) j["topic_hint"] = b.topic_hint->value;
  return j;
}

FactBundle bundle_from_json(const Json& j) {
  FactBundle b;
  b.text = j.value("text", std::string{});
  b.topic_hint = opt_topic_from(j, "topic_hint");
  if (j.contains("facts")) {
    for (const auto& fj : j.at("facts")) {
      Fact f;
      f.field = fj.at("field").get<std::string>();
      f.value = fj.at("value").get<std::string>();
      f.entity_tag = opt_str_from(fj, "entity_tag");
      f.source_id = fj.value("source", std::string{});
      f.excerpt = opt_str_from(fj, "excerpt");
      b.facts.push_back(std::move(f));
    }
  }
  if (j.contains("links")) {
    for (const auto& lj : j.at("links")) {
      b.links.push_back(Link{TopicId{lj.at("other").get<std::string>()},
                             edge_kind_from_string(lj.at("kind").get<std::string>()), lj.at("outgoing").get<bool>()});
    }
  }
  return b;
}

Json to_json(const Query& q) {
  Json j{{"text", q.text}, {"mode", to_string(q.mode)}, {"depth", q.depth}};
  if (q.as_of) j["as_of"] = *q.as_of;
  if (q.root) j["root"] = q.root->value;
  if (q.explicit_unit) j["explicit"] = unit_json(*q.explicit_unit);
  return j;
}

Query query_from_json(const Json& j) {
  Query q;
  q.text = j.value("text", std::string{});
  q.mode = query_mode_from_string(j.value("mode", std::string("default")));
  if (j.contains("as_of") && !j.at("as_of").is_null()) q.as_of = j.at("as_of").get<std::uint64_t>();
  q.root = opt_topic_from(j, "root");
  q.depth = j.value("depth", std::size_t{1});
  if (j.contains("explicit") && !j.at("explicit").is_null()) q.explicit_unit = unit_from(j.at("explicit"));
  return q;
}

Json to_json(const RetrievalOutput& o) {
  Json answers = Json::array();
  for (const auto& a : o.answers) {
    answers.push_back(Json{{"topic", a.topic.value},
                           {"field", a.field},
                           {"value", a.value},
                           {"at", ts_json(a.at)},
                           {"prov", prov_json(a.prov)}});
  }
  Json accessed = Json::array();
  for (const auto& u : o.accessed_units) accessed.push_back(unit_json(u));
  Json context = Json::array();
  for (const auto& c : o.context) {
    context.push_back(Json{{"topic", c.topic.value}, {"title", c.title}, {"summary", c.summary}});
  }
  return Json{{"answers", std::move(answers)}, {"accessed", std::move(accessed)}, {"context", std::move(context)}};
}

RetrievalOutput output_from_json(const Json& j) {
  RetrievalOutput o;
  for (const auto& a : j.at("answers")) {
    o.answers.push_back(Answer{TopicId{a.at("topic").get<std::string>()}, a.at("field").get<std::string>(),
                               a.at("value").get<std::string>(), ts_from(a.at("at")), prov_from(a.at("prov"))});
  }
  for (const auto& u : j.at("accessed")) o.accessed_units.push_back(unit_from(u));
  for (const auto& c : j.at("context")) {
    o.context.push_back(ContextItem{TopicId{c.at("topic").get<std::string>()}, c.at("title").get<std::string>(),
                                    c.at("summary").get<std::string>()});
  }
  return o;
}

Json to_json(const EvidenceItem& e) {
  return std::visit(
      overloaded{
          [](const evidence::DuplicateTopics& x) {
            return Json{{"kind", "duplicate_topics"}, {"a", x.a.value}, {"b", x.b.value}, {"similarity", x.similarity}};
          },
          [](const evidence::ConflictingValues& x) {
            return Json{{"kind", "conflicting_values"}, {"topic", x.topic.value}, {"field", x.field}};
          },
          [](const evidence::SchemaDrift& x) {
            return Json{{"kind", "schema_drift"}, {"topic", x.topic.value}, {"field", x.field}, {"canonical", x.canonical}};
          },
          [](const evidence::DependencyFlag& x) {
            return Json{{"kind", "dependency_flag"},
                        {"topic", x.topic.value},
                        {"cause_topic", x.cause_topic.value},
                        {"cause_field", x.cause_field}};
          },
          [](const evidence::PromotionCandidate& x) {
            return Json{{"kind", "promotion_candidate"}, {"topic", x.topic.value}, {"entity_tag", x.entity_tag}};
          },
      },
      e);
}

EvidenceItem evidence_from_json(const Json& j) {
  const auto kind = j.at("kind").get<std::string>();
  auto topic = [&](const char* key) { return TopicId{j.at(key).get<std::string>()}; };
  auto str = [&](const char* key) { return j.at(key).get<std::string>(); };
  if (kind == "duplicate_topics") return evidence::DuplicateTopics{topic("a"), topic("b"), j.at("similarity").get<double>()};
  if (kind == "conflicting_values") return evidence::ConflictingValues{topic("topic"), str("field")};
  if (kind == "schema_drift") return evidence::SchemaDrift{topic("topic"), str("field"), str("canonical")};
  if (kind == "dependency_flag") return evidence::DependencyFlag{topic("topic"), topic("cause_topic"), str("cause_field")};
  if (kind == "promotion_candidate") return evidence::PromotionCandidate{topic("topic"), str("entity_tag")};
  throw std::invalid_argument("unknown evidence kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Deltas

Json to_json(const Delta& d) {
  Json j = std::visit(
      overloaded{
          [](const delta::TopicCreated& x) {
            return Json{{"topic", x.topic.value}, {"title", x.title}, {"summary", x.summary}};
          },
          [](const delta::FieldCreated& x) {
            return Json{{"topic", x.topic.value}, {"field", x.field},           {"entity_tag", opt_str(x.entity_tag)},
                        {"salience", x.salience}, {"tier", to_string(x.tier)}, {"last_access", x.last_access}};
          },
          [](const delta::EntryAppended& x) {
            return Json{{"topic", x.topic.value}, {"field", x.field}, {"entry", entry_json(x.entry)}};
          },
          [](const delta::EntryFlagged& x) {
            return Json{{"topic", x.topic.value}, {"field", x.field}, {"index", x.index}, {"superseded", x.superseded}};
          },
          [](const delta::HistoryCompressed& x) {
            return Json{{"topic", x.topic.value}, {"field", x.field}, {"count", x.count}, {"summary", entry_json(x.summary)}};
          },
          [](const delta::SalienceChanged& x) {
            return Json{{"topic", x.topic.value}, {"field", x.field}, {"from", x.from}, {"to", x.to}};
          },
          [](const delta::FieldAccessed& x) {
            return Json{{"topic", x.topic.value}, {"field", x.field}, {"tick", x.tick}};
          },
          [](const delta::TierChanged& x) {
            return Json{{"topic", x.topic.value}, {"field", x.field}, {"from", to_string(x.from)}, {"to", to_string(x.to)}};
          },
          [](const delta::TopicArchived& x) {
            return Json{{"topic", x.topic.value},
                        {"archived", x.archived},
                        {"merged_into", x.merged_into ? Json(x.merged_into->value) : Json(nullptr)}};
          },
          [](const delta::EdgeAdded& x) { return Json{{"edge", edge_json(x.edge)}}; },
          [](const delta::EdgeRemoved& x) { return Json{{"edge", edge_json(x.edge)}}; },
          [](const delta::EmbeddingRefreshed& x) { return Json{{"topic", x.topic.value}}; },
          [](const delta::RevisionFlagged& x) {
            return Json{{"flag", flag_json(x.flag)},
                        {"added", x.added},
                        {"via", x.via ? Json(to_string(*x.via)) : Json(nullptr)}};
          },
          [](const delta::MarkChanged& x) {
            return Json{{"topic", x.topic.value}, {"mark", x.mark ? Json(mark_name(*x.mark)) : Json(nullptr)}};
          },
          [](const delta::EntryRemoved& x) {
            return Json{{"topic", x.topic.value}, {"field", x.field}, {"index", x.index}};
          },
          [](const delta::FieldRemoved& x) { return Json{{"topic", x.topic.value}, {"field", x.field}}; },
      },
      d);
  j["kind"] = delta_kind(d);
  return j;
}

Delta delta_from_json(const Json& j) {
  const auto kind = j.at("kind").get<std::string>();
  auto topic = [&] { return TopicId{j.at("topic").get<std::string>()}; };
  auto field = [&] { return j.at("field").get<std::string>(); };
  if (kind == "topic_created") {
    return delta::TopicCreated{topic(), j.at("title").get<std::string>(), j.at("summary").get<std::string>()};
  }
  if (kind == "field_created") {
    return delta::FieldCreated{topic(),
                               field(),
                               opt_str_from(j, "entity_tag"),
                               j.at("salience").get<double>(),
                               tier_from_string(j.at("tier").get<std::string>()),
                               j.at("last_access").get<std::uint64_t>()};
  }
  if (kind == "entry_appended") return delta::EntryAppended{topic(), field(), entry_from(j.at("entry"))};
  if (kind == "entry_flagged") {
    return delta::EntryFlagged{topic(), field(), j.at("index").get<std::size_t>(), j.at("superseded").get<bool>()};
  }
  if (kind == "history_compressed") {
    return delta::HistoryCompressed{topic(), field(), j.at("count").get<std::size_t>(), entry_from(j.at("summary"))};
  }
  if (kind == "salience_changed") {
    return delta::SalienceChanged{topic(), field(), j.at("from").get<double>(), j.at("to").get<double>()};
  }
  if (kind == "field_accessed") return delta::FieldAccessed{topic(), field(), j.at("tick").get<std::uint64_t>()};
  if (kind == "tier_changed") {
    return delta::TierChanged{topic(), field(), tier_from_string(j.at("from").get<std::string>()),
                              tier_from_string(j.at("to").get<std::string>())};
  }
  if (kind == "topic_archived") return delta::TopicArchived{topic(), j.at("archived").get<bool>(), opt_topic_from(j, "merged_into")};
  if (kind == "edge_added") return delta::EdgeAdded{edge_from(j.at("edge"))};
  if (kind == "edge_removed") return delta::EdgeRemoved{edge_from(j.at("edge"))};
  if (kind == "embedding_refreshed") return delta::EmbeddingRefreshed{topic()};
  if (kind == "revision_flagged") {
    std::optional<EdgeKind> via;
    if (auto v = opt_str_from(j, "via")) via = edge_kind_from_string(*v);
    return delta::RevisionFlagged{flag_from(j.at("flag")), j.at("added").get<bool>(), via};
  }
  if (kind == "mark_changed") {
    std::optional<MarkKind> mark;
    if (auto m = opt_str_from(j, "mark")) mark = mark_from(*m);
    return delta::MarkChanged{topic(), mark};
  }
  if (kind == "entry_removed") return delta::EntryRemoved{topic(), field(), j.at("index").get<std::size_t>()};
  if (kind == "field_removed") return delta::FieldRemoved{topic(), field()};
  throw std::invalid_argument("unknown delta kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Events and records

Json to_json(const EngineEvent& e) {
  return std::visit(
      overloaded{
          [](const event::Ingest& x) { return Json{{"op", "ingest"}, {"bundle", to_json(x.bundle)}}; },
          [](const event::Retrieve& x) { return Json{{"op", "retrieve"}, {"query", to_json(x.query)}}; },
          [](const event::Revise& x) {
            Json ev(nullptr);
            if (x.evidence) {
              ev = Json::array();
              for (const auto& item : *x.evidence) ev.push_back(to_json(item));
            }
            Json visited = Json::array();
            for (const auto& id : x.visited) visited.push_back(id.value);
            return Json{{"op", "revise"}, {"evidence", std::move(ev)}, {"visited", std::move(visited)}};
          },
          [](const event::Forget& x) {
            Json protect = Json::array();
            for (const auto& u : x.protect) protect.push_back(unit_json(u));
            return Json{{"op", "forget"}, {"headroom", x.headroom}, {"protect", std::move(protect)}};
          },
          [](const event::Tick&) { return Json{{"op", "tick"}}; },
      },
      e);
}

EngineEvent event_from_json(const Json& j) {
  const auto op = j.at("op").get<std::string>();
  if (op == "ingest") return event::Ingest{bundle_from_json(j.at("bundle"))};
  if (op == "retrieve") return event::Retrieve{query_from_json(j.at("query"))};
  if (op == "revise") {
    event::Revise r;
    if (!j.at("evidence").is_null()) {
      r.evidence.emplace();
      for (const auto& item : j.at("evidence")) r.evidence->push_back(evidence_from_json(item));
    }
    for (const auto& id : j.at("visited")) r.visited.insert(TopicId{id.get<std::string>()});
    return r;
  }
  if (op == "forget") {
    event::Forget f;
    f.headroom = j.at("headroom").get<std::size_t>();
    for (const auto& u : j.at("protect")) f.protect.push_back(unit_from(u));
    return f;
  }
  if (op == "tick") return event::Tick{};
  throw std::invalid_argument("unknown event op '" + op + "'");
}

Json to_json(const TransitionRecord& r) {
  Json deltas = Json::array();
  for (const auto& d : r.deltas) deltas.push_back(to_json(d));
  Json log = Json::array();
  for (const auto& p : r.policy_log) {
    Json pj{{"policy", p.policy},
            {"event", to_string(p.event)},
            {"bindings", bindings_json(p.bindings)},
            {"fired", p.fired},
            {"action", p.action},
            {"evidence", p.evidence}};
    if (p.error) pj["error"] = *p.error;
    log.push_back(std::move(pj));
  }
  Json j{{"tick", r.tick ? Json(*r.tick) : Json(nullptr)},
         {"op", r.op},
         {"input", to_json(r.input)},
         {"deltas", std::move(deltas)},
         {"policy_log", std::move(log)},
         {"committed", r.committed},
         {"abort_reason", r.abort_reason},
         {"output", r.output ? to_json(*r.output) : Json(nullptr)},
         {"digest_after", r.digest_after ? Json(to_hex(*r.digest_after)) : Json(nullptr)}};
  return j;
}

TransitionRecord record_from_json(const Json& j) {
  TransitionRecord r;
  if (!j.at("tick").is_null()) r.tick = j.at("tick").get<std::uint64_t>();
  r.op = j.at("op").get<std::string>();
  r.input = event_from_json(j.at("input"));
  for (const auto& d : j.at("deltas")) r.deltas.push_back(delta_from_json(d));
  for (const auto& pj : j.at("policy_log")) {
    PolicyEvaluation p;
    p.policy = pj.at("policy").get<std::string>();
    auto ev = event_kind_from_string(pj.at("event").get<std::string>());
    if (!ev) throw std::invalid_argument("unknown event kind in policy log");
    p.event = *ev;
    p.bindings = bindings_from(pj.at("bindings"));
    p.fired = pj.at("fired").get<bool>();
    p.action = pj.at("action").get<std::string>();
    p.evidence = pj.at("evidence").get<std::vector<std::string>>();
    p.error = opt_str_from(pj, "error");
    r.policy_log.push_back(std::move(p));
  }
  r.committed = j.at("committed").get<bool>();
  r.abort_reason = j.at("abort_reason").get<std::string>();
  if (!j.at("output").is_null()) r.output = output_from_json(j.at("output"));
  if (!j.at("digest_after").is_null()) r.digest_after = digest_from_hex(j.at("digest_after").get<std::string>());
  return r;
}

// ---------------------------------------------------------------------------
// Files

std::string encode_journal(const Journal& jr) {
  std::string out = "GEMJ";
  put_u32(out, kJournalVersion);
  Json header{{"format", "gem-journal"},
              {"version", kJournalVersion},
              {"system", jr.system},
              {"config", config_to_json(jr.config)},
              {"genesis", to_json(jr.genesis)},
              {"genesis_digest", to_hex(state_digest(jr.genesis))}};
  put_block(out, header.dump());
  for (const auto& r : jr.records) put_block(out, to_json(r).dump());
  return out;
}

Journal decode_journal(std::string_view bytes) {
  Reader in(bytes);
  auto magic = in.take(4);
  if (!magic || *magic != "GEMJ") throw CorruptionError("not a journal: bad magic");
  auto version = in.u32();
  if (!version) throw CorruptionError("journal truncated in header");
  if (*version != kJournalVersion) throw CorruptionError("unsupported journal version " + std::to_string(*version));
  auto hlen = in.u32();
  auto hbytes = hlen ? in.take(*hlen) : std::nullopt;
  if (!hbytes) throw CorruptionError("journal truncated in header");

  Journal jr;
  try {
    Json h = Json::parse(*hbytes);
    jr.system = h.at("system").get<std::string>();
    jr.config = config_from_json(h.at("config"));
    jr.genesis = state_from_json(h.at("genesis"));
    if (to_hex(state_digest(jr.genesis)) != h.at("genesis_digest").get<std::string>()) {
      throw CorruptionError("genesis digest mismatch", 0);
    }
  } catch (const CorruptionError&) {
    throw;
  } catch (const std::exception& e) {
    throw CorruptionError(std::string("unreadable journal header: ") + e.what());
  }

  std::uint64_t next_tick = jr.genesis.clock.tick + 1;
  while (!in.done()) {
    auto len = in.u32();
    auto body = len ? in.take(*len) : std::nullopt;
    if (!body) {
      throw CorruptionError("journal truncated mid-record near tick " + std::to_string(next_tick), next_tick);
    }
    try {
      jr.records.push_back(record_from_json(Json::parse(*body)));
    } catch (const std::exception& e) {
      throw CorruptionError("unreadable record near tick " + std::to_string(next_tick) + ": " + e.what(), next_tick);
    }
    if (jr.records.back().committed) ++next_tick;
  }
  return jr;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_journal(const std::filesystem::path& path, const Journal& j) { write_file_bytes(path, encode_journal(j)); }

Journal read_journal(const std::filesystem::path& path) { return decode_journal(read_file_bytes(path)); }

std::string encode_snapshot(const MemoryState& s) {
  std::string out = "GEMS";
  put_u32(out, kSnapshotVersion);
  put_block(out, to_json(s).dump());
  Digest d = state_digest(s);
  out.append(reinterpret_cast<const char*>(d.data()), d.size());
  return out;
}

MemoryState decode_snapshot(std::string_view bytes) {
  Reader in(bytes);
  auto magic = in.take(4);
  if (!magic || *magic != "GEMS") throw CorruptionError("not a snapshot: bad magic");
  auto version = in.u32();
  if (!version) throw CorruptionError("snapshot truncated");
  if (*version != kSnapshotVersion) throw CorruptionError("unsupported snapshot version " + std::to_string(*version));
  auto len = in.u32();
  auto body = len ? in.take(*len) : std::nullopt;
  auto digest = in.take(32);
  if (!body || !digest) throw CorruptionError("snapshot truncated");
  if (!in.done()) throw CorruptionError("trailing bytes after snapshot");
  MemoryState s;
  try {
    s = state_from_json(Json::parse(*body));
  } catch (const std::exception& e) {
    throw CorruptionError(std::string("unreadable snapshot: ") + e.what());
  }
  Digest expected{};
  std::memcpy(expected.data(), digest->data(), expected.size());
  if (state_digest(s) != expected) throw CorruptionError("snapshot digest mismatch", s.clock.tick);
  return s;
}

void write_snapshot(const std::filesystem::path& path, const MemoryState& s) { write_file_bytes(path, encode_snapshot(s)); }

MemoryState read_snapshot(const std::filesystem::path& path) { return decode_snapshot(read_file_bytes(path)); }

}  // namespace gem
