#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gem/types.hpp"

namespace gem {

class LookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CurrentValue {
  std::string value;
  Timestamp at;
  Provenance prov;
};

// The value a default query may return: absent for archived topics, hidden
// fields and missing keys.
std::optional<CurrentValue> current_value(const MemoryState& state, const TopicId& topic, std::string_view field);

// Explicit lookup: same entry selection, but ignores archival and tier.
std::optional<CurrentValue> lookup_current(const MemoryState& state, const TopicId& topic, std::string_view field);

// Full history in insertion order. Throws LookupError on a missing key.
const std::vector<ValueEntry>& history(const MemoryState& state, const TopicId& topic, std::string_view field);

// Active-tier fields of non-archived topics.
std::size_t active_footprint(const MemoryState& state);

using Digest = std::array<std::uint8_t, 32>;

// SHA-256 over a canonical byte encoding of topics, edges, policies, clock,
// queues and marks. Embeddings are excluded: they are a pure function of the
// topic content that is hashed.
Digest state_digest(const MemoryState& state);
std::string to_hex(const Digest& d);
Digest digest_from_hex(std::string_view hex);

const Topic* find_topic(const MemoryState& state, const TopicId& id);
const Field* find_field(const MemoryState& state, const TopicId& id, std::string_view field);

// Index of the last non-compressed, non-superseded entry.
std::optional<std::size_t> current_index(const Field& f);

// True when the field's non-compressed entries do not have exactly one
// non-superseded entry, or when that entry is older than another one.
bool has_superseded_current(const Field& f);
std::vector<TopicId> topics_with_superseded_current(const MemoryState& state);

std::vector<TopicId> successors(const MemoryState& state, const TopicId& id, EdgeKind kind);

// Length of the leading run a compression may replace: everything before
// the current entry and the k_recent most recent entries.
std::size_t compressible_prefix(const Field& f, std::uint64_t k_recent);
bool worth_compressing(const Field& f, std::uint64_t k_recent);

// Tier the forgetting ladder assigns to a non-hidden field.
Tier ladder_tier(double salience, const SalienceParams& p);

// Topics on which a forgetting pass would change something.
std::vector<TopicId> attenuation_candidates(const MemoryState& state, const SalienceParams& p);

// Every source provenance record held by a field. Summaries contribute the
// records they replaced, not their own marker.
std::set<Provenance> reachable_provenance(const Field& f);

struct UnitRef {
  TopicId topic;
  std::string field;

  auto operator<=>(const UnitRef&) const = default;
  bool operator==(const UnitRef&) const = default;
};

// Active units ordered from first-to-hide to last-to-hide: salience
// ascending, then older last access, then field name, then topic id.
std::vector<UnitRef> hide_order(const MemoryState& state);
bool hides_before(const Topic& ta, const Field& a, const Topic& tb, const Field& b);

// Number of units that the hide ordering keeps longer than `unit`, over all
// fields of non-archived topics regardless of tier.
std::size_t attenuation_rank(const MemoryState& state, const UnitRef& unit);

}  // namespace gem
