#include "gem/delta.hpp"

#include <stdexcept>

#include "gem/state.hpp"

namespace gem {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Topic& topic_of(MemoryState& s, const TopicId& id) {
  auto it = s.topics.find(id);
  if (it == s.topics.end()) throw std::logic_error("delta references unknown topic '" + id.value + "'");
  return it->second;
}

Field& field_of(MemoryState& s, const TopicId& id, const std::string& name) {
  Topic& t = topic_of(s, id);
  auto it = t.fields.find(name);
  if (it == t.fields.end()) {
    throw std::logic_error("delta references unknown field '" + id.value + "." + name + "'");
  }
  return it->second;
}

}  // namespace

const char* delta_kind(const Delta& d) {
  return std::visit(overloaded{
                        [](const delta::TopicCreated&) { return "topic_created"; },
                        [](const delta::FieldCreated&) { return "field_created"; },
                        [](const delta::EntryAppended&) { return "entry_appended"; },
                        [](const delta::EntryFlagged&) { return "entry_flagged"; },
                        [](const delta::HistoryCompressed&) { return "history_compressed"; },
                        [](const delta::SalienceChanged&) { return "salience_changed"; },
                        [](const delta::FieldAccessed&) { return "field_accessed"; },
                        [](const delta::TierChanged&) { return "tier_changed"; },
                        [](const delta::TopicArchived&) { return "topic_archived"; },
                        [](const delta::EdgeAdded&) { return "edge_added"; },
                        [](const delta::EdgeRemoved&) { return "edge_removed"; },
                        [](const delta::EmbeddingRefreshed&) { return "embedding_refreshed"; },
                        [](const delta::RevisionFlagged&) { return "revision_flagged"; },
                        [](const delta::MarkChanged&) { return "mark_changed"; },
                        [](const delta::EntryRemoved&) { return "entry_removed"; },
                        [](const delta::FieldRemoved&) { return "field_removed"; },
                    },
                    d);
}

EmbeddingVector compute_topic_embedding(const Topic& topic) {
  std::string text = topic.title + " " + topic.summary;
  for (const auto& [name, field] : topic.fields) {
    if (auto idx = current_index(field)) {
      text += " ";
      text += field.history[*idx].value;
    }
  }
  return embed(text);
}

void apply_delta(MemoryState& s, const Delta& d) {
  std::visit(overloaded{
                 [&](const delta::TopicCreated& x) {
                   if (s.topics.count(x.topic)) throw std::logic_error("topic '" + x.topic.value + "' already exists");
                   Topic t;
                   t.id = x.topic;
                   t.title = x.title;
                   t.summary = x.summary;
                   t.embedding = compute_topic_embedding(t);
                   s.topics.emplace(x.topic, std::move(t));
                 },
                 [&](const delta::FieldCreated& x) {
                   Topic& t = topic_of(s, x.topic);
                   if (t.fields.count(x.field)) {
                     throw std::logic_error("field '" + x.topic.value + "." + x.field + "' already exists");
                   }
                   Field f;
                   f.name = x.field;
                   f.entity_tag = x.entity_tag;
                   f.salience = x.salience;
                   f.tier = x.tier;
                   f.last_access = x.last_access;
                   t.fields.emplace(x.field, std::move(f));
                 },
                 [&](const delta::EntryAppended& x) { field_of(s, x.topic, x.field).history.push_back(x.entry); },
                 [&](const delta::EntryFlagged& x) {
                   auto& h = field_of(s, x.topic, x.field).history;
                   if (x.index >= h.size()) throw std::logic_error("entry index out of range");
                   h[x.index].superseded = x.superseded;
                 },
                 [&](const delta::HistoryCompressed& x) {
                   auto& h = field_of(s, x.topic, x.field).history;
                   if (x.count > h.size()) throw std::logic_error("compression run exceeds history");
                   h.erase(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(x.count));
                   h.insert(h.begin(), x.summary);
                 },
                 [&](const delta::SalienceChanged& x) { field_of(s, x.topic, x.field).salience = x.to; },
                 [&](const delta::FieldAccessed& x) { field_of(s, x.topic, x.field).last_access = x.tick; },
                 [&](const delta::TierChanged& x) { field_of(s, x.topic, x.field).tier = x.to; },
                 [&](const delta::TopicArchived& x) {
                   Topic& t = topic_of(s, x.topic);
                   t.archived = x.archived;
                   t.merged_into = x.merged_into;
                 },
                 [&](const delta::EdgeAdded& x) {
                   if (x.edge.src == x.edge.dst) throw std::logic_error("self edge on '" + x.edge.src.value + "'");
                   topic_of(s, x.edge.src);
                   topic_of(s, x.edge.dst);
                   if (!s.edges.insert(x.edge).second) throw std::logic_error("duplicate edge");
                 },
                 [&](const delta::EdgeRemoved& x) {
                   if (!s.edges.erase(x.edge)) throw std::logic_error("removing a missing edge");
                 },
                 [&](const delta::EmbeddingRefreshed& x) {
                   Topic& t = topic_of(s, x.topic);
                   t.embedding = compute_topic_embedding(t);
                 },
                 [&](const delta::RevisionFlagged& x) {
                   if (x.added) {
                     topic_of(s, x.flag.topic);
                     s.revision_queue.insert(x.flag);
                   } else {
                     s.revision_queue.erase(x.flag);
                   }
                 },
                 [&](const delta::MarkChanged& x) {
                   if (x.mark) {
                     topic_of(s, x.topic);
                     s.attenuation_marks[x.topic] = *x.mark;
                   } else {
                     s.attenuation_marks.erase(x.topic);
                   }
                 },
                 [&](const delta::EntryRemoved& x) {
                   auto& h = field_of(s, x.topic, x.field).history;
                   if (x.index >= h.size()) throw std::logic_error("entry index out of range");
                   h.erase(h.begin() + static_cast<std::ptrdiff_t>(x.index));
                 },
                 [&](const delta::FieldRemoved& x) { topic_of(s, x.topic).fields.erase(x.field); },
             },
             d);
}

}  // namespace gem
