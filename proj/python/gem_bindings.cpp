// Thin pybind11 layer. Structured values cross the boundary as JSON text;
// the Python package decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gem/audit.hpp"
#include "gem/policy.hpp"
#include "gem/serialize.hpp"
#include "gem/workload.hpp"

namespace py = pybind11;

namespace {

class System {
 public:
  System(const std::string& kind, const std::string& config_json, const std::string& base_dir) {
    gem::EngineConfig config = gem::config_from_json_text(config_json, base_dir);
    if (kind == "gem") {
      sys_ = gem::make_gem_system(std::move(config));
    } else if (kind == "baseline") {
      sys_ = gem::make_baseline_system(std::move(config));
    } else {
      throw py::value_error("system must be 'gem' or 'baseline', got '" + kind + "'");
    }
  }

  std::string submit(const std::string& event_json) {
    const gem::EngineEvent e = gem::event_from_json(gem::Json::parse(event_json));
    const gem::SubmitOutcome out = sys_->submit(e);
    gem::Json j{{"committed", out.committed}, {"abort_reason", out.abort_reason}};
    j["output"] = out.output ? gem::to_json(*out.output) : gem::Json(nullptr);
    return j.dump();
  }

  std::string name() const { return sys_->name(); }
  std::string digest() const { return gem::to_hex(gem::state_digest(sys_->state())); }
  std::size_t footprint() const { return sys_->footprint(); }
  std::uint64_t tick() const { return sys_->state().clock.tick; }
  std::string state_json() const { return gem::to_json(sys_->state()).dump(); }
  py::bytes journal() const { return py::bytes(gem::encode_journal(sys_->journal())); }
  py::bytes snapshot() const { return py::bytes(gem::encode_snapshot(sys_->state())); }

  std::optional<std::string> current(const std::string& topic, const std::string& field) const {
    const auto e = gem::current_value(sys_->state(), gem::TopicId{topic}, field);
    if (!e) return std::nullopt;
    return e->value;
  }

  std::optional<std::string> lookup(const std::string& topic, const std::string& field) const {
    const auto e = gem::lookup_current(sys_->state(), gem::TopicId{topic}, field);
    if (!e) return std::nullopt;
    return e->value;
  }

  std::vector<std::string> history(const std::string& topic, const std::string& field) const {
    std::vector<std::string> out;
    for (const auto& e : gem::history(sys_->state(), gem::TopicId{topic}, field)) {
      if (e.compressed) {
        for (const auto& s : e.summarized) out.push_back(s.value);
      } else {
        out.push_back(e.value);
      }
    }
    return out;
  }

 private:
  std::unique_ptr<gem::MemorySystem> sys_;
};

std::vector<gem::Query> probes_from(const std::vector<std::string>& texts) {
  std::vector<gem::Query> out;
  for (const auto& t : texts) out.push_back(gem::Query{t});
  return out;
}

}  // namespace

PYBIND11_MODULE(_gem, m) {
  m.doc() = "Governed evolving memory engine";

  py::register_exception<gem::CorruptionError>(m, "CorruptionError");
  py::register_exception<gem::ConfigError>(m, "ConfigError");
  py::register_exception<gem::PolicyParseError>(m, "PolicyParseError", PyExc_ValueError);
  py::register_exception<gem::WorkloadError>(m, "WorkloadError", PyExc_ValueError);
  py::register_exception<gem::LookupError>(m, "UnitLookupError", PyExc_KeyError);

  py::class_<System>(m, "System")
      .def(py::init<const std::string&, const std::string&, const std::string&>(), py::arg("kind"),
           py::arg("config_json") = "{}", py::arg("base_dir") = ".")
      .def("submit", &System::submit, py::arg("event_json"))
      .def_property_readonly("name", &System::name)
      .def("digest", &System::digest)
      .def("footprint", &System::footprint)
      .def("tick", &System::tick)
      .def("state_json", &System::state_json)
      .def("journal", &System::journal)
      .def("snapshot", &System::snapshot)
      .def("current", &System::current, py::arg("topic"), py::arg("field"))
      .def("lookup", &System::lookup, py::arg("topic"), py::arg("field"))
      .def("history", &System::history, py::arg("topic"), py::arg("field"));

  m.def(
      "audit",
      [](const py::bytes& journal, const std::vector<std::string>& probes) {
        const auto report = gem::audit(gem::decode_journal(std::string(journal)), probes_from(probes));
        return std::make_pair(gem::report_to_json(report), gem::render_report(report));
      },
      py::arg("journal"), py::arg("probes") = std::vector<std::string>{});
  m.def(
      "replay_digest",
      [](const py::bytes& journal) { return gem::to_hex(gem::state_digest(gem::replay(gem::decode_journal(std::string(journal))))); },
      py::arg("journal"));
  m.def(
      "snapshot_digest",
      [](const py::bytes& snapshot) { return gem::to_hex(gem::state_digest(gem::decode_snapshot(std::string(snapshot)))); },
      py::arg("snapshot"));
  m.def(
      "run_workload",
      [](const std::string& workload, const std::string& system, const std::string& config_json,
         const std::string& base_dir) {
        if (system != "gem" && system != "baseline") throw py::value_error("unknown system '" + system + "'");
        auto config = gem::config_from_json_text(config_json, base_dir);
        auto s = system == "baseline" ? gem::make_baseline_system(config) : gem::make_gem_system(config);
        const auto result = gem::run_workload(*s, gem::load_workload(workload));
        return std::make_tuple(result.failures, gem::metrics_csv({result}), py::bytes(gem::encode_journal(s->journal())));
      },
      py::arg("workload"), py::arg("system") = "gem", py::arg("config_json") = "{}", py::arg("base_dir") = ".");
  m.def(
      "round_trip_policy", [](const std::string& text) { return gem::render_policy(gem::parse_policy(text)); },
      py::arg("text"));
  m.attr("PROPAGATE_ON_CHANGE_POLICY") = std::string(gem::kPropagateOnChangePolicy);
}
