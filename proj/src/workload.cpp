#include "gem/workload.hpp"

#include <charconv>
#include <sstream>

#include "gem/serialize.hpp"

namespace gem {

namespace {

std::optional<std::string> opt_string(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

FactBundle parse_bundle(const Json& j) {
  FactBundle b;
  b.text = j.value("text", std::string{});
  if (auto hint = opt_string(j, "topic_hint")) b.topic_hint = TopicId{*hint};
  for (const auto& f : j.value("facts", Json::array())) {
    Fact fact;
    fact.field = f.at("field").get<std::string>();
    fact.value = f.at("value").get<std::string>();
    fact.entity_tag = opt_string(f, "entity_tag");
    fact.source_id = f.value("source", std::string("workload"));
    fact.excerpt = opt_string(f, "excerpt");
    b.facts.push_back(std::move(fact));
  }
  for (const auto& l : j.value("links", Json::array())) {
    Link link;
    link.kind = edge_kind_from_string(l.value("kind", std::string("extension")));
    if (l.contains("to")) {
      link.other = TopicId{l.at("to").get<std::string>()};
      link.outgoing = true;
    } else {
      link.other = TopicId{l.at("from").get<std::string>()};
      link.outgoing = false;
    }
    b.links.push_back(std::move(link));
  }
  return b;
}

step::Query parse_query_step(const Json& j) {
  step::Query s;
  s.query = query_from_json(j);
  if (j.contains("expect")) {
    const Json& e = j.at("expect");
    Expectation x;
    if (e.is_string()) {
      x.value = e.get<std::string>();
    } else {
      x.value = e.at("value").get<std::string>();
      if (auto t = opt_string(e, "topic")) x.topic = TopicId{*t};
      x.field = opt_string(e, "field");
    }
    s.expect = std::move(x);
  }
  return s;
}

Check parse_check(const Json& j) {
  Check c;
  const auto kind = j.at("check").get<std::string>();
  if (kind == "current_value") {
    c.kind = Check::Kind::CurrentValue;
    c.value = j.at("equals").get<std::string>();
  } else if (kind == "footprint_le") {
    c.kind = Check::Kind::FootprintLe;
    const Json& lim = j.at("limit");
    if (!(lim.is_string() && lim.get<std::string>() == "beta")) c.limit = lim.get<std::size_t>();
    return c;
  } else if (kind == "unit_archived") {
    c.kind = Check::Kind::UnitArchived;
  } else if (kind == "tier") {
    c.kind = Check::Kind::TierIs;
    c.tier = tier_from_string(j.at("tier").get<std::string>());
  } else {
    throw std::invalid_argument("unknown check '" + kind + "'");
  }
  c.topic = TopicId{j.at("topic").get<std::string>()};
  c.field = j.value("field", std::string{});
  return c;
}

template <class F>
void for_each_line(std::string_view text, F&& fn) {
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto b = raw.find_first_not_of(" \t\r");
    if (b == std::string::npos || raw[b] == '#') continue;
    Json j;
    try {
      j = Json::parse(raw);
    } catch (const Json::exception& e) {
      throw WorkloadError(std::string("not valid JSON: ") + e.what(), line);
    }
    if (!j.is_object()) throw WorkloadError("expected a JSON object", line);
    try {
      fn(j, line);
    } catch (const WorkloadError&) {
      throw;
    } catch (const std::exception& e) {
      throw WorkloadError(e.what(), line);
    }
  }
}

class GemSystem final : public MemorySystem {
 public:
  explicit GemSystem(EngineConfig config) : engine_(std::move(config)) {}
  std::string name() const override { return "gem"; }
  SubmitOutcome submit(const EngineEvent& e) override { return engine_.submit(e); }
  const MemoryState& state() const override { return engine_.state(); }
  const Journal& journal() const override { return engine_.journal(); }
  std::size_t footprint() const override { return active_footprint(engine_.state()); }

 private:
  Engine engine_;
};

class BaselineSystem final : public MemorySystem {
 public:
  explicit BaselineSystem(EngineConfig config) : adapter_(std::move(config)) {}
  std::string name() const override { return "baseline"; }
  SubmitOutcome submit(const EngineEvent& e) override { return adapter_.submit(e); }
  const MemoryState& state() const override { return adapter_.state(); }
  const Journal& journal() const override { return adapter_.journal(); }
  std::size_t footprint() const override { return adapter_.store().size(); }

 private:
  BaselineAdapter adapter_;
};

std::optional<std::string> failed_check(const MemorySystem& sys, const Check& c) {
  const MemoryState& s = sys.state();
  const std::string unit = c.field.empty() ? c.topic.value : c.topic.value + "." + c.field;
  switch (c.kind) {
    case Check::Kind::CurrentValue: {
      auto v = current_value(s, c.topic, c.field);
      if (!v) return unit + " has no current value, expected '" + c.value + "'";
      if (v->value != c.value) return unit + " is '" + v->value + "', expected '" + c.value + "'";
      return std::nullopt;
    }
    case Check::Kind::FootprintLe: {
      const double limit = c.limit ? static_cast<double>(*c.limit) : sys.journal().config.beta.at(s.interactions);
      if (static_cast<double>(sys.footprint()) > limit) {
        return "footprint " + std::to_string(sys.footprint()) + " exceeds " + std::to_string(static_cast<long long>(limit));
      }
      return std::nullopt;
    }
    case Check::Kind::UnitArchived: {
      const Topic* t = find_topic(s, c.topic);
      if (!t) return unit + " does not exist";
      if (t->archived) return std::nullopt;
      if (c.field.empty()) return unit + " is not archived";
      const Field* f = find_field(s, c.topic, c.field);
      if (!f) return unit + " does not exist";
      if (f->tier != Tier::Hidden) return unit + " is still " + std::string(to_string(f->tier));
      return std::nullopt;
    }
    case Check::Kind::TierIs: {
      const Field* f = find_field(s, c.topic, c.field);
      if (!f) return unit + " does not exist";
      if (f->tier != c.tier) return unit + " is " + std::string(to_string(f->tier)) + ", expected " + to_string(c.tier);
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::vector<WorkloadStep> parse_workload(std::string_view text) {
  std::vector<WorkloadStep> steps;
  for_each_line(text, [&](const Json& j, std::size_t line) {
    if (!j.contains("op")) throw WorkloadError("missing 'op'", line);
    const auto op = j.at("op").get<std::string>();
    WorkloadStep s;
    s.line = line;
    if (op == "ingest") {
      s.op = step::Ingest{parse_bundle(j)};
    } else if (op == "query") {
      s.op = parse_query_step(j);
    } else if (op == "tick") {
      s.op = step::Tick{j.value("count", std::size_t{1})};
    } else if (op == "assert") {
      s.op = step::Assert{parse_check(j)};
    } else {
      throw WorkloadError("unknown op '" + op + "'", line);
    }
    steps.push_back(std::move(s));
  });
  return steps;
}

std::vector<WorkloadStep> load_workload(const std::filesystem::path& path) {
  return parse_workload(read_file_bytes(path));
}

std::vector<Query> load_probes(const std::filesystem::path& path) {
  std::vector<Query> probes;
  for_each_line(read_file_bytes(path), [&](const Json& j, std::size_t) {
    if (j.contains("op")) {
      if (j.at("op") == "query") probes.push_back(query_from_json(j));
      return;
    }
    probes.push_back(query_from_json(j));
  });
  return probes;
}

std::unique_ptr<MemorySystem> make_gem_system(EngineConfig config) {
  return std::make_unique<GemSystem>(std::move(config));
}

std::unique_ptr<MemorySystem> make_baseline_system(EngineConfig config) {
  return std::make_unique<BaselineSystem>(std::move(config));
}

RunResult run_workload(MemorySystem& sys, const std::vector<WorkloadStep>& steps) {
  RunResult result;
  std::size_t stale = 0;
  std::size_t lost = 0;
  double salience_sum = 0.0;

  for (const auto& s : steps) {
    StepOutcome out;
    out.line = s.line;
    const std::size_t journal_before = sys.journal().records.size();
    bool row = true;

    if (const auto* x = std::get_if<step::Ingest>(&s.op)) {
      out.op = "ingest";
      auto r = sys.submit(event::Ingest{x->bundle});
      out.message = r.committed ? "committed" : "aborted: " + r.abort_reason;
    } else if (const auto* x = std::get_if<step::Query>(&s.op)) {
      out.op = "query";
      auto r = sys.submit(event::Retrieve{x->query});
      if (!r.committed) {
        out.ok = !x->expect;
        out.message = "aborted: " + r.abort_reason;
      } else {
        std::string shown;
        for (const auto& a : r.output->answers) {
          shown += (shown.empty() ? "" : "; ") + a.topic.value + "." + a.field + "=" + a.value;
        }
        out.message = shown.empty() ? "no answers" : shown;
      }
      if (x->expect && r.committed) {
        bool found = false;
        bool wrong = false;
        for (const auto& a : r.output->answers) {
          if (x->expect->topic && a.topic != *x->expect->topic) continue;
          if (x->expect->field && a.field != *x->expect->field) continue;
          (a.value == x->expect->value ? found : wrong) = true;
        }
        if (wrong) ++stale;
        if (!found) ++lost;
        if (wrong || !found) {
          out.ok = false;
          out.message += " [expected '" + x->expect->value + "'";
          if (wrong) out.message += ", stale value returned";
          if (!found) out.message += ", expected value missing";
          out.message += "]";
        }
      } else if (x->expect) {
        ++lost;
      }
    } else if (const auto* x = std::get_if<step::Tick>(&s.op)) {
      out.op = "tick";
      for (std::size_t i = 0; i < x->count; ++i) sys.submit(event::Tick{});
      out.message = std::to_string(x->count) + " tick(s)";
    } else if (const auto* x = std::get_if<step::Assert>(&s.op)) {
      out.op = "assert";
      row = false;
      auto failure = failed_check(sys, x->check);
      out.ok = !failure;
      out.message = failure ? *failure : "ok";
    }

    const auto& records = sys.journal().records;
    for (std::size_t i = journal_before; i < records.size(); ++i) {
      if (records[i].op != "retrieve" || !records[i].committed) continue;
      for (const auto& d : records[i].deltas) {
        if (const auto* sc = std::get_if<delta::SalienceChanged>(&d)) salience_sum += sc->to - sc->from;
      }
    }

    if (!out.ok) ++result.failures;
    result.outcomes.push_back(std::move(out));
    if (row) result.rows.push_back(MetricsRow{sys.name(), sys.state().clock.tick, sys.footprint(), stale, lost, salience_sum});
  }
  return result;
}

std::string metrics_csv(const std::vector<RunResult>& runs) {
  std::string out(kCompareHeader);
  out += "\n";
  for (const auto& run : runs) {
    for (const auto& r : run.rows) {
      out += r.system + "," + std::to_string(r.tick) + "," + std::to_string(r.footprint) + "," +
             std::to_string(r.stale_answers) + "," + std::to_string(r.lost_answers) + "," +
             format_double(r.salience_delta_sum) + "\n";
    }
  }
  return out;
}

}  // namespace gem
