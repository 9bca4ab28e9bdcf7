#include "gem/state.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <memory>

namespace gem {

const char* to_string(Tier t) {
  switch (t) {
    case Tier::Active: return "Active";
    case Tier::Compressed: return "Compressed";
    case Tier::Hidden: return "Hidden";
  }
  return "?";
}

Tier tier_from_string(const std::string& s) {
  if (s == "Active") return Tier::Active;
  if (s == "Compressed") return Tier::Compressed;
  if (s == "Hidden") return Tier::Hidden;
  throw std::invalid_argument("unknown tier '" + s + "'");
}

const char* to_string(EdgeKind k) {
  return k == EdgeKind::Extension ? "extension" : "association";
}

EdgeKind edge_kind_from_string(const std::string& s) {
  if (s == "extension" || s == "Extension") return EdgeKind::Extension;
  if (s == "association" || s == "Association") return EdgeKind::Association;
  throw std::invalid_argument("unknown edge kind '" + s + "'");
}

const Topic* find_topic(const MemoryState& state, const TopicId& id) {
  auto it = state.topics.find(id);
  return it == state.topics.end() ? nullptr : &it->second;
}

const Field* find_field(const MemoryState& state, const TopicId& id, std::string_view field) {
  const Topic* t = find_topic(state, id);
  if (!t) return nullptr;
  auto it = t->fields.find(std::string(field));
  return it == t->fields.end() ? nullptr : &it->second;
}

std::optional<std::size_t> current_index(const Field& f) {
  for (std::size_t i = f.history.size(); i-- > 0;) {
    const auto& e = f.history[i];
    if (!e.compressed && !e.superseded) return i;
  }
  return std::nullopt;
}

namespace {

std::optional<CurrentValue> entry_value(const Field& f) {
  auto idx = current_index(f);
  if (!idx) return std::nullopt;
  const auto& e = f.history[*idx];
  return CurrentValue{e.value, e.at, e.prov};
}

}  // namespace

std::optional<CurrentValue> current_value(const MemoryState& state, const TopicId& topic, std::string_view field) {
  const Topic* t = find_topic(state, topic);
  if (!t || t->archived) return std::nullopt;
  const Field* f = find_field(state, topic, field);
  if (!f || f->tier == Tier::Hidden) return std::nullopt;
  return entry_value(*f);
}

std::optional<CurrentValue> lookup_current(const MemoryState& state, const TopicId& topic, std::string_view field) {
  const Field* f = find_field(state, topic, field);
  if (!f) return std::nullopt;
  return entry_value(*f);
}

const std::vector<ValueEntry>& history(const MemoryState& state, const TopicId& topic, std::string_view field) {
  const Topic* t = find_topic(state, topic);
  if (!t) throw LookupError("unknown topic '" + topic.value + "'");
  auto it = t->fields.find(std::string(field));
  if (it == t->fields.end()) {
    throw LookupError("unknown field '" + std::string(field) + "' in topic '" + topic.value + "'");
  }
  return it->second.history;
}

std::size_t active_footprint(const MemoryState& state) {
  std::size_t n = 0;
  for (const auto& [id, topic] : state.topics) {
    if (topic.archived) continue;
    for (const auto& [name, field] : topic.fields) {
      if (field.tier == Tier::Active) ++n;
    }
  }
  return n;
}

// ---------------------------------------------------------------------------
// Digest

namespace {

class Hasher {
 public:
  Hasher() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) { EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr); }

  void bytes(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }

  void u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void flag(bool b) { u64(b ? 1 : 0); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void prov(const Provenance& p) {
    str(p.source_id);
    u64(p.event_id);
    str(p.excerpt);
  }

  Digest finish() {
    Digest d{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), d.data(), &len);
    return d;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

Digest state_digest(const MemoryState& state) {
  Hasher h;
  h.str("gem-state-v1");
  h.u64(state.clock.tick);
  h.u64(state.interactions);

  h.u64(state.topics.size());
  for (const auto& [id, topic] : state.topics) {
    h.str(id.value);
    h.str(topic.title);
    h.str(topic.summary);
    h.flag(topic.archived);
    h.str(topic.merged_into ? topic.merged_into->value : std::string());
    h.u64(topic.fields.size());
    for (const auto& [name, field] : topic.fields) {
      h.str(name);
      h.str(field.entity_tag.value_or(""));
      h.flag(field.entity_tag.has_value());
      h.f64(field.salience);
      h.u64(static_cast<std::uint64_t>(field.tier));
      h.u64(field.last_access);
      h.u64(field.history.size());
      for (const auto& e : field.history) {
        h.str(e.value);
        h.u64(e.at.tick);
        h.prov(e.prov);
        h.flag(e.superseded);
        h.flag(e.compressed);
        h.u64(e.summarized.size());
        for (const auto& s : e.summarized) {
          h.str(s.value);
          h.u64(s.at.tick);
          h.prov(s.prov);
        }
      }
    }
  }

  h.u64(state.edges.size());
  for (const auto& e : state.edges) {
    h.str(e.src.value);
    h.str(e.dst.value);
    h.u64(static_cast<std::uint64_t>(e.kind));
    h.u64(e.created_at.tick);
  }

  h.u64(state.policies.size());
  for (const auto& p : state.policies) h.str(render_policy(p));

  h.u64(state.revision_queue.size());
  for (const auto& f : state.revision_queue) {
    h.str(f.topic.value);
    h.str(f.cause_topic.value);
    h.str(f.cause_field);
  }

  h.u64(state.attenuation_marks.size());
  for (const auto& [id, kind] : state.attenuation_marks) {
    h.str(id.value);
    h.u64(static_cast<std::uint64_t>(kind));
  }
  return h.finish();
}

std::string to_hex(const Digest& d) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : d) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

Digest digest_from_hex(std::string_view hex) {
  if (hex.size() != 64) throw std::invalid_argument("digest must be 64 hex characters");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("digest contains a non-hex character");
  };
  Digest d{};
  for (std::size_t i = 0; i < 32; ++i) {
    d[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return d;
}

// ---------------------------------------------------------------------------

bool has_superseded_current(const Field& f) {
  std::size_t live = 0;
  std::uint64_t newest = 0;
  bool any = false;
  std::uint64_t live_at = 0;
  for (const auto& e : f.history) {
    if (e.compressed) continue;
    any = true;
    newest = std::max(newest, e.at.tick);
    if (!e.superseded) {
      ++live;
      live_at = e.at.tick;
    }
  }
  if (!any) return false;
  return live != 1 || live_at < newest;
}

std::vector<TopicId> topics_with_superseded_current(const MemoryState& state) {
  std::vector<TopicId> out;
  for (const auto& [id, topic] : state.topics) {
    if (topic.archived) continue;
    for (const auto& [name, field] : topic.fields) {
      if (field.tier != Tier::Hidden && has_superseded_current(field)) {
        out.push_back(id);
        break;
      }
    }
  }
  return out;
}

std::vector<TopicId> successors(const MemoryState& state, const TopicId& id, EdgeKind kind) {
  std::vector<TopicId> out;
  auto it = state.edges.lower_bound(Edge{id, TopicId{}, EdgeKind::Extension, {}});
  for (; it != state.edges.end() && it->src == id; ++it) {
    if (it->kind == kind) out.push_back(it->dst);
  }
  return out;
}

std::size_t compressible_prefix(const Field& f, std::uint64_t k_recent) {
  const std::size_t n = f.history.size();
  if (n <= k_recent + 1) return 0;
  std::size_t limit = n - 1 - static_cast<std::size_t>(k_recent);
  auto cur = current_index(f);
  if (cur) limit = std::min(limit, *cur);
  return limit;
}

bool worth_compressing(const Field& f, std::uint64_t k_recent) {
  return compressible_prefix(f, k_recent) >= 2;
}

Tier ladder_tier(double salience, const SalienceParams& p) {
  switch (tier_of(salience, p)) {
    case Eligibility::Current: return Tier::Active;
    case Eligibility::CompressEligible: return Tier::Compressed;
    case Eligibility::HideEligible:
    case Eligibility::ArchiveEligible: return Tier::Hidden;
  }
  return Tier::Active;
}

std::vector<TopicId> attenuation_candidates(const MemoryState& state, const SalienceParams& p) {
  std::vector<TopicId> out;
  for (const auto& [id, topic] : state.topics) {
    if (topic.archived) continue;
    bool change = false;
    bool all_below_archive = !topic.fields.empty();
    for (const auto& [name, field] : topic.fields) {
      if (field.salience >= p.theta_archive) all_below_archive = false;
      if (field.salience < p.theta_summary && worth_compressing(field, p.k_recent)) change = true;
      if (field.tier != Tier::Hidden && ladder_tier(field.salience, p) != field.tier) change = true;
    }
    auto mark = state.attenuation_marks.find(id);
    if (mark != state.attenuation_marks.end() && mark->second == MarkKind::Archive) change = true;
    if (change || all_below_archive) out.push_back(id);
  }
  return out;
}

std::set<Provenance> reachable_provenance(const Field& f) {
  std::set<Provenance> out;
  for (const auto& e : f.history) {
    // A summary's own provenance is a marker; its records are the originals.
    if (!e.compressed) out.insert(e.prov);
    for (const auto& s : e.summarized) out.insert(s.prov);
  }
  return out;
}

bool hides_before(const Topic& ta, const Field& a, const Topic& tb, const Field& b) {
  if (a.salience != b.salience) return a.salience < b.salience;
  if (a.last_access != b.last_access) return a.last_access < b.last_access;
  if (a.name != b.name) return a.name < b.name;
  return ta.id < tb.id;
}

std::vector<UnitRef> hide_order(const MemoryState& state) {
  std::vector<std::pair<const Topic*, const Field*>> units;
  for (const auto& [id, topic] : state.topics) {
    if (topic.archived) continue;
    for (const auto& [name, field] : topic.fields) {
      if (field.tier == Tier::Active) units.emplace_back(&topic, &field);
    }
  }
  std::sort(units.begin(), units.end(), [](const auto& x, const auto& y) {
    return hides_before(*x.first, *x.second, *y.first, *y.second);
  });
  std::vector<UnitRef> out;
  out.reserve(units.size());
  for (const auto& [t, f] : units) out.push_back(UnitRef{t->id, f->name});
  return out;
}

std::size_t attenuation_rank(const MemoryState& state, const UnitRef& unit) {
  const Topic* ut = find_topic(state, unit.topic);
  const Field* uf = find_field(state, unit.topic, unit.field);
  if (!ut || !uf) throw LookupError("unknown unit '" + unit.topic.value + "." + unit.field + "'");
  std::size_t rank = 0;
  for (const auto& [id, topic] : state.topics) {
    if (topic.archived) continue;
    for (const auto& [name, field] : topic.fields) {
      if (&field == uf) continue;
      if (hides_before(*ut, *uf, topic, field)) ++rank;
    }
  }
  return rank;
}

}  // namespace gem
