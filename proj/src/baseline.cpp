#include "gem/baseline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <memory>

namespace gem {

CrudStore::CrudStore(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("capacity must be at least 1");
}

PutResult CrudStore::put(std::string text, Timestamp at, RecordTag tag) {
  PutResult r;
  r.id = next_id_++;
  Record rec;
  rec.id = r.id;
  rec.embedding = embed(text);
  rec.text = std::move(text);
  rec.created_at = at;
  rec.tag = std::move(tag);
  records_.push_back(std::move(rec));
  // Oldest first, whatever its access history.
  while (records_.size() > capacity_) {
    r.evicted.push_back(std::move(records_.front()));
    records_.pop_front();
  }
  return r;
}

std::vector<Record> CrudStore::query(std::string_view text, std::size_t k) const {
  const EmbeddingVector q = embed(text);
  std::vector<std::pair<double, const Record*>> scored;
  for (const auto& r : records_) {
    double c = cosine(q, r.embedding);
    if (c > 0.0) scored.emplace_back(c, &r);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Record> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(*scored[i].second);
  return out;
}

Digest CrudStore::digest() const {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  auto u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    EVP_DigestUpdate(ctx.get(), b, 8);
  };
  auto str = [&](const std::string& s) {
    u64(s.size());
    EVP_DigestUpdate(ctx.get(), s.data(), s.size());
  };
  u64(next_id_);
  for (const auto& r : records_) {
    u64(r.id);
    str(r.text);
    u64(r.created_at.tick);
    str(r.tag.topic.value);
    str(r.tag.field);
    str(r.tag.value);
  }
  Digest d{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), d.data(), &len);
  return d;
}

// ---------------------------------------------------------------------------

BaselineAdapter::BaselineAdapter(EngineConfig config) : store_(config.baseline_capacity) {
  validate(config);
  journal_.system = "crud-baseline";
  journal_.genesis = genesis_state(config);
  journal_.config = std::move(config);
  mirror_ = journal_.genesis;
}

SubmitOutcome BaselineAdapter::commit(TransitionRecord rec, std::optional<RetrievalOutput> output) {
  Transaction tx(mirror_);
  for (const auto& d : rec.deltas) tx.apply(d);
  rec.committed = true;
  rec.tick = mirror_.clock.tick + 1;
  rec.output = output;
  MemoryState next = std::move(tx).take_state();
  finish_commit(next, rec);
  rec.digest_after = state_digest(next);
  mirror_ = std::move(next);
  journal_.records.push_back(std::move(rec));
  return SubmitOutcome{true, {}, std::move(output)};
}

SubmitOutcome BaselineAdapter::submit(const EngineEvent& event) {
  TransitionRecord rec;
  rec.op = operator_name(event);
  rec.input = event;
  const std::uint64_t now = mirror_.clock.tick + 1;

  if (const auto* ev = std::get_if<event::Ingest>(&event)) {
    if (ev->bundle.facts.empty()) {
      rec.abort_reason = "empty-bundle";
      journal_.records.push_back(rec);
      return SubmitOutcome{false, rec.abort_reason, std::nullopt};
    }
    const TopicId unit_topic = ev->bundle.topic_hint.value_or(TopicId{"records"});
    // Mirror bookkeeping is replayed on a scratch copy so removal indices
    // are computed against the right history.
    Transaction tx(mirror_);
    auto emit = [&](Delta d) {
      tx.apply(d);
      rec.deltas.push_back(std::move(d));
    };
    for (const auto& fact : ev->bundle.facts) {
      if (!find_topic(tx.state(), unit_topic)) emit(delta::TopicCreated{unit_topic, unit_topic.value, ""});
      if (!find_field(tx.state(), unit_topic, fact.field)) {
        emit(delta::FieldCreated{unit_topic, fact.field, fact.entity_tag, 0.0, Tier::Active, now});
      }
      ValueEntry entry;
      entry.value = fact.value;
      entry.at = Timestamp{now, std::nullopt};
      entry.prov = Provenance{fact.source_id, now, fact.excerpt.value_or(ev->bundle.text)};
      emit(delta::EntryAppended{unit_topic, fact.field, entry});
      PutResult put = store_.put(ev->bundle.text, entry.at, RecordTag{unit_topic, fact.field, fact.value, fact.source_id});
      for (const auto& gone : put.evicted) {
        emit(delta::EntryRemoved{gone.tag.topic, gone.tag.field, 0});
        if (find_field(tx.state(), gone.tag.topic, gone.tag.field)->history.empty()) {
          emit(delta::FieldRemoved{gone.tag.topic, gone.tag.field});
        }
      }
    }
    return commit(std::move(rec), std::nullopt);
  }

  if (const auto* ev = std::get_if<event::Retrieve>(&event)) {
    RetrievalOutput out;
    std::set<UnitRef> seen;
    for (const auto& r : store_.query(ev->query.text, journal_.config.k_topics)) {
      out.answers.push_back(Answer{r.tag.topic, r.tag.field, r.tag.value, r.created_at,
                                   Provenance{r.tag.source_id, r.created_at.tick, r.text}});
      UnitRef u{r.tag.topic, r.tag.field};
      if (seen.insert(u).second) out.accessed_units.push_back(u);
    }
    return commit(std::move(rec), std::move(out));
  }

  // Ticks and maintenance events change nothing in a CRUD store.
  return commit(std::move(rec), std::nullopt);
}

}  // namespace gem
