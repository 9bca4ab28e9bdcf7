#include "gem/router.hpp"

#include <cctype>

namespace gem {

bool valid_topic_id(const std::string& id) {
  if (id.empty()) return false;
  for (unsigned char c : id) {
    if (std::isspace(c) || c == '.' || c == '"' || c < 0x20) return false;
  }
  return true;
}

RouteDecision EmbeddingRouter::select_host(const MemoryState& state, const FactBundle& bundle,
                                           const EngineConfig& config) const {
  if (bundle.topic_hint) {
    const TopicId& hint = *bundle.topic_hint;
    if (!valid_topic_id(hint.value)) throw RoutingError("invalid topic_hint '" + hint.value + "'");
    if (const Topic* t = find_topic(state, hint)) {
      if (t->archived) throw RoutingError("topic_hint references archived topic '" + hint.value + "'");
      return {RouteDecision::Kind::ExistingTopic, hint, 1.0};
    }
    return {RouteDecision::Kind::NewTopic, hint, 0.0};
  }

  const EmbeddingVector q = embed(bundle.text);
  const Topic* best = nullptr;
  double best_score = 0.0;
  for (const auto& [id, topic] : state.topics) {
    if (topic.archived) continue;
    double score = cosine(q, topic.embedding);
    // Map order is ascending id, so strict > keeps the smaller id on ties.
    if (!best || score > best_score) {
      best = &topic;
      best_score = score;
    }
  }
  if (best && best_score >= config.tau_topic) return {RouteDecision::Kind::ExistingTopic, best->id, best_score};
  return {RouteDecision::Kind::NewTopic, TopicId{}, 0.0};
}

}  // namespace gem
