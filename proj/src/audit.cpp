#include "gem/audit.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "gem/serialize.hpp"

namespace gem {

namespace {

using UnitKey = std::pair<TopicId, std::string>;

std::string subject_of(const TopicId& t, const std::string& f) { return t.value + "." + f; }

// Last-writer-wins over appended values, keyed by unit. Ordered by the
// entry's own tick, then by journal position.
class ShadowLedger {
 public:
  void observe(const TransitionRecord& rec) {
    for (const auto& d : rec.deltas) {
      const auto* x = std::get_if<delta::EntryAppended>(&d);
      if (!x || x->entry.compressed) continue;
      ++seq_;
      auto& slot = latest_[{x->topic, x->field}];
      if (slot.seq != 0 && x->entry.at.tick < slot.tick) continue;
      slot =Slot{x->entry.at.tick, seq_, x->entry.value};
    }
  }

  const std::string* latest(const TopicId& t, const std::string& f) const {
    auto it = latest_.find({t, f});
    return it == latest_.end() ? nullptr : &it->second.value;
  }

 private:
  struct Slot {
    std::uint64_t tick = 0;
    std::uint64_t seq = 0;
    std::string value;
  };
  std::map<UnitKey, Slot> latest_;
  std::uint64_t seq_ = 0;
};

bool attenuated(const MemoryState& s, const TopicId& t, const std::string& f) {
  const Topic* topic = find_topic(s, t);
  if (!topic || topic->archived) return true;
  const Field* field = find_field(s, t, f);
  return !field || field->tier == Tier::Hidden;
}

void check_answers(const std::vector<Answer>& answers, const MemoryState& s, const ShadowLedger& shadow,
                   std::uint64_t tick, const std::string& origin, std::vector<Violation>& out) {
  for (const auto& a : answers) {
    if (attenuated(s, a.topic, a.field)) {
      out.push_back({tick, subject_of(a.topic, a.field), origin + " returned an attenuated unit"});
      continue;
    }
    const std::string* expected = shadow.latest(a.topic, a.field);
    if (expected && *expected != a.value) {
      out.push_back({tick, subject_of(a.topic, a.field),
                     origin + " returned '" + a.value + "' but the latest value is '" + *expected + "'"});
    }
  }
}

// The value a default read must see: newest non-compressed entry, later
// position winning ties, and it must be the only live one.
std::optional<std::string> superseded_problem(const Field& f) {
  std::optional<std::size_t> newest;
  std::size_t live = 0;
  for (std::size_t i = 0; i < f.history.size(); ++i) {
    const auto& e = f.history[i];
    if (e.compressed) continue;
    if (!newest || e.at.tick >= f.history[*newest].at.tick) newest = i;
    if (!e.superseded) ++live;
  }
  if (!newest) return std::nullopt;
  if (live != 1) return std::to_string(live) + " live entries";
  if (f.history[*newest].superseded) return "current entry '" + f.history[*newest].value + "' is not the newest";
  return std::nullopt;
}

std::set<Provenance> provenance_of(const Field& f) {
  std::set<Provenance> out;
  for (const auto& e : f.history) {
    if (!e.compressed) out.insert(e.prov);
    for (const auto& s : e.summarized) out.insert(s.prov);
  }
  return out;
}

std::size_t count_active(const MemoryState& s) {
  std::size_t n = 0;
  for (const auto& [id, t] : s.topics) {
    if (t.archived) continue;
    n += static_cast<std::size_t>(
        std::count_if(t.fields.begin(), t.fields.end(), [](const auto& kv) { return kv.second.tier == Tier::Active; }));
  }
  return n;
}

// Active, non-accessed units the hide ordering puts ahead of `u`.
std::set<UnitKey> hidden_ahead(const MemoryState& s, const UnitKey& u, const std::set<UnitKey>& accessed) {
  std::set<UnitKey> out;
  const Topic* tu = find_topic(s, u.first);
  const Field* fu = find_field(s, u.first, u.second);
  if (!tu || !fu) return out;
  for (const auto& [id, t] : s.topics) {
    if (t.archived) continue;
    for (const auto& [name, f] : t.fields) {
      if (f.tier != Tier::Active) continue;
      UnitKey v{id, name};
      if (v == u || accessed.count(v)) continue;
      if (hides_before(t, f, *tu, *fu)) out.insert(v);
    }
  }
  return out;
}

bool association_step(const Delta& d, const MemoryState& before, const MemoryState& after) {
  const auto* x = std::get_if<delta::RevisionFlagged>(&d);
  if (!x || !x->added || !x->via) return false;
  if (*x->via == EdgeKind::Association) return true;
  Edge e{x->flag.cause_topic, x->flag.topic, EdgeKind::Extension, {}};
  return !before.edges.count(e) && !after.edges.count(e);
}

}  // namespace

std::size_t ViolationReport::total() const {
  std::size_t n = 0;
  for (const auto& c : conditions) n += c.size();
  return n;
}

ViolationReport audit(const Journal& journal, const std::vector<Query>& probes) {
  ViolationReport report;
  auto& c1 = report.conditions[0];
  auto& c2 = report.conditions[1];
  auto& c3 = report.conditions[2];
  auto& c4 = report.conditions[3];
  auto& c5 = report.conditions[4];
  auto& c6 = report.conditions[5];

  ShadowLedger shadow;
  std::map<TopicId, std::string> pending;  // dependent topic -> cause
  std::set<std::string> unrecoverable;

  replay(journal, [&](const TransitionRecord& rec, std::size_t, const MemoryState& before, const MemoryState& after) {
    const std::uint64_t tick = *rec.tick;

    // C1: journaled default-mode answers against the shadow ledger.
    if (rec.output) {
      const auto* r = std::get_if<event::Retrieve>(&rec.input);
      if (r && r->query.mode == QueryMode::Default && !r->query.explicit_unit) {
        check_answers(rec.output->answers, before, shadow, tick, "retrieval", c1);
      }
    }

    // C3 part 1: a retrieval must not touch a topic still awaiting revision.
    if (rec.op == "retrieve" && rec.output) {
      std::set<TopicId> touched;
      for (const auto& u : rec.output->accessed_units) touched.insert(u.topic);
      for (const auto& t : touched) {
        if (auto it = pending.find(t); it != pending.end()) {
          c3.push_back({tick, t.value, "retrieved before revision evaluated the change to " + it->second});
        }
      }
    }
    if (const auto* rv = std::get_if<event::Revise>(&rec.input)) {
      if (rv->evidence) {
        for (const auto& item : *rv->evidence) {
          if (const auto* dep = std::get_if<evidence::DependencyFlag>(&item)) pending.erase(dep->topic);
        }
      } else {
        for (const auto& f : before.revision_queue) pending.erase(f.topic);
      }
    }

    shadow.observe(rec);

    // C3 part 2: every extension successor of an updated topic is now due.
    for (const auto& d : rec.deltas) {
      const auto* x = std::get_if<delta::EntryAppended>(&d);
      if (!x || x->entry.compressed) continue;
      for (const auto& e : after.edges) {
        if (e.src == x->topic && e.kind == EdgeKind::Extension) pending[e.dst] = subject_of(x->topic, x->field);
      }
    }
    for (const auto& d : rec.deltas) {
      if (association_step(d, before, after)) {
        const auto& f = std::get<delta::RevisionFlagged>(d).flag;
        c3.push_back({tick, f.topic.value, "revision flag raised without an extension edge from " + f.cause_topic.value});
      }
    }

    // C1: probes against the committed snapshot.
    for (const auto& probe : probes) {
      Query q = probe;
      q.mode = QueryMode::Default;
      q.explicit_unit.reset();
      RetrievalOutput out;
      try {
        out = answer_query(after, q, journal.config);
      } catch (const std::exception&) {
        continue;
      }
      check_answers(out.answers, after, shadow, tick, "probe '" + probe.text + "'", c1);
    }

    // C2: postconditions re-evaluated on the committed state.
    const double beta = journal.config.beta.at(after.interactions);
    for (const auto& p : before.policies) {
      if (p.on_event != EventKind::PreCommit || p.action.kind != Action::Kind::RejectTransition) continue;
      try {
        if (evaluate_condition(p.condition, after, EvalContext{journal.config.salience, beta, {}})) {
          c2.push_back({tick, p.name, "committed state violates postcondition '" + p.action.message + "'"});
        }
      } catch (const EvaluationError& e) {
        c2.push_back({tick, p.name, std::string("postcondition not evaluable: ") + e.what()});
      }
    }
    for (const auto& [id, t] : after.topics) {
      if (t.archived) continue;
      for (const auto& [name, f] : t.fields) {
        if (f.tier == Tier::Hidden) continue;
        if (auto problem = superseded_problem(f)) {
          c2.push_back({tick, subject_of(id, name), "default read would be unsound: " + *problem});
        }
      }
    }

    // C4: provenance reachable from surviving units never shrinks.
    if (rec.op == "forget" || rec.op == "revise") {
      for (const auto& [id, t] : before.topics) {
        const Topic* ta = find_topic(after, id);
        if (!ta) continue;
        for (const auto& [name, f] : t.fields) {
          auto it = ta->fields.find(name);
          if (it == ta->fields.end()) continue;
          auto now = provenance_of(it->second);
          for (const auto& p : provenance_of(f)) {
            if (!now.count(p)) {
              c4.push_back({tick, subject_of(id, name),
                            "lost provenance " + p.source_id + "@" + std::to_string(p.event_id)});
              break;
            }
          }
        }
      }
    }

    // C5: bounded footprint and recoverable attenuation.
    const std::size_t footprint = count_active(after);
    if (static_cast<double>(footprint) > beta) {
      c5.push_back({tick, "state", "active footprint " + std::to_string(footprint) + " exceeds beta " +
                                       std::to_string(static_cast<long long>(beta))});
    }
    for (const auto& d : rec.deltas) {
      if (const auto* x = std::get_if<delta::EntryRemoved>(&d)) {
        c5.push_back({tick, subject_of(x->topic, x->field), "entry destroyed; no longer recoverable"});
      } else if (const auto* y = std::get_if<delta::FieldRemoved>(&d)) {
        c5.push_back({tick, subject_of(y->topic, y->field), "field destroyed; no longer recoverable"});
      }
    }
    for (const auto& [id, t] : after.topics) {
      for (const auto& [name, f] : t.fields) {
        if (!t.archived && f.tier != Tier::Hidden) continue;
        const std::string subject = subject_of(id, name);
        if (!lookup_current(after, id, name) && !unrecoverable.count(subject)) {
          unrecoverable.insert(subject);
          c5.push_back({tick, subject, "attenuated unit does not answer an explicit lookup"});
        }
      }
    }

    // C6: retrieval commits a strict salience rise and never loses rank.
    if (rec.op == "retrieve" && rec.output && !rec.output->accessed_units.empty()) {
      std::map<UnitKey, double> rise;
      for (const auto& d : rec.deltas) {
        if (const auto* x = std::get_if<delta::SalienceChanged>(&d)) rise[{x->topic, x->field}] += x->to - x->from;
      }
      std::set<UnitKey> accessed;
      for (const auto& u : rec.output->accessed_units) accessed.insert({u.topic, u.field});
      std::vector<std::string> flat;
      for (const auto& u : accessed) {
        if (!(rise[u] > 0.0)) flat.push_back(subject_of(u.first, u.second));
      }
      if (!flat.empty()) {
        std::string list;
        for (const auto& s : flat) list += (list.empty() ? "" : ", ") + s;
        c6.push_back({tick, flat.front(), "retrieval committed without a salience increase for " + list});
      }
      for (const auto& u : accessed) {
        const Field* f = find_field(before, u.first, u.second);
        if (!f || f->tier != Tier::Active || attenuated(before, u.first, u.second)) continue;
        auto ahead_before = hidden_ahead(before, u, accessed);
        auto ahead_after = hidden_ahead(after, u, accessed);
        if (!std::includes(ahead_after.begin(), ahead_after.end(), ahead_before.begin(), ahead_before.end())) {
          c6.push_back({tick, subject_of(u.first, u.second), "hide-ordering position got worse after access"});
        }
      }
    }
  });

  for (auto& c : report.conditions) std::sort(c.begin(), c.end());
  return report;
}

std::size_t association_traversals(const Journal& journal) {
  std::size_t n = 0;
  replay(journal, [&](const TransitionRecord& rec, std::size_t, const MemoryState& before, const MemoryState& after) {
    for (const auto& d : rec.deltas) n += association_step(d, before, after) ? 1 : 0;
  });
  return n;
}

std::string render_report(const ViolationReport& r) {
  if (r.pass()) return "PASS C1–C6: 0 violations\n";
  std::ostringstream os;
  os << "FAIL C1–C6: " << r.total() << " violations\n";
  for (int c = 1; c <= 6; ++c) os << "  C" << c << ": " << r.total(c) << "\n";
  for (int c = 1; c <= 6; ++c) {
    auto sorted = r.conditions[static_cast<std::size_t>(c - 1)];
    std::sort(sorted.begin(), sorted.end());
    for (const auto& v : sorted) {
      os << "C" << c << " tick " << v.tick << " " << v.subject << ": " << v.detail << "\n";
    }
  }
  return os.str();
}

std::string report_to_json(const ViolationReport& r) {
  Json j = Json::object();
  for (int c = 1; c <= 6; ++c) {
    Json list = Json::array();
    auto sorted = r.conditions[static_cast<std::size_t>(c - 1)];
    std::sort(sorted.begin(), sorted.end());
    for (const auto& v : sorted) {
      list.push_back(Json{{"tick", v.tick}, {"subject", v.subject}, {"detail", v.detail}});
    }
    j["c" + std::to_string(c)] = std::move(list);
  }
  j["pass"] = r.pass();
  j["total"] = r.total();
  return j.dump();
}

}  // namespace gem
