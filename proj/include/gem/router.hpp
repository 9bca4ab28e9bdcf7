#pragma once

#include <stdexcept>

#include "gem/config.hpp"
#include "gem/inputs.hpp"

namespace gem {

class RoutingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RouteDecision {
  enum class Kind { ExistingTopic, NewTopic };

  Kind kind = Kind::NewTopic;
  TopicId topic;       // ExistingTopic, or the hinted id for a NewTopic
  double score = 0.0;  // ExistingTopic

  bool existing() const { return kind == Kind::ExistingTopic; }
};

// Picks the host topic for an ingested bundle. The engine depends only on
// this interface; an LLM-backed router can replace the default.
class Router {
 public:
  virtual ~Router() = default;
  virtual RouteDecision select_host(const MemoryState& state, const FactBundle& bundle,
                                    const EngineConfig& config) const = 0;
};

// Cosine over feature-hash embeddings. A live hint wins; a hint naming a
// topic that does not exist yet creates it under that id.
class EmbeddingRouter final : public Router {
 public:
  RouteDecision select_host(const MemoryState& state, const FactBundle& bundle,
                            const EngineConfig& config) const override;
};

// Hint ids must be non-empty and free of whitespace and '.'.
bool valid_topic_id(const std::string& id);

}  // namespace gem
