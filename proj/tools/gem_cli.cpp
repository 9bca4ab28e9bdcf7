#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "gem/audit.hpp"
#include "gem/serialize.hpp"
#include "gem/workload.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

gem::EngineConfig resolve_config(const std::string& flag) {
  std::string path = flag;
  if (path.empty()) {
    if (const char* env = std::getenv("GEM_CONFIG")) path = env;
  }
  if (path.empty()) return gem::EngineConfig{};
  return gem::load_config(path);
}

int cmd_replay(const std::string& workload, const std::string& config, const std::string& journal_out,
               const std::string& system) {
  auto cfg = resolve_config(config);
  auto steps = gem::load_workload(workload);
  auto sys = system == "baseline" ? gem::make_baseline_system(cfg) : gem::make_gem_system(cfg);
  auto result = gem::run_workload(*sys, steps);
  for (const auto& o : result.outcomes) {
    std::cout << "line " << o.line << " " << o.op << ": " << (o.ok ? "" : "FAILED ") << o.message << "\n";
  }
  if (!journal_out.empty()) gem::write_journal(journal_out, sys->journal());
  std::cout << sys->name() << ": " << sys->journal().records.size() << " records, tick " << sys->state().clock.tick
            << ", digest " << gem::to_hex(gem::state_digest(sys->state())) << "\n";
  if (result.failures) {
    std::cout << result.failures << " check(s) failed\n";
    return kCheckFailed;
  }
  return kPass;
}

int cmd_audit(const std::string& journal_path, const std::string& probes_path, bool as_json) {
  auto journal = gem::read_journal(journal_path);
  std::vector<gem::Query> probes;
  if (!probes_path.empty()) probes = gem::load_probes(probes_path);
  auto report = gem::audit(journal, probes);
  std::cout << (as_json ? gem::report_to_json(report) + "\n" : gem::render_report(report));
  return report.pass() ? kPass : kCheckFailed;
}

int cmd_compare(const std::string& workload, const std::string& config, const std::string& csv_out) {
  auto cfg = resolve_config(config);
  auto steps = gem::load_workload(workload);
  auto engine = gem::make_gem_system(cfg);
  auto baseline = gem::make_baseline_system(cfg);
  std::vector<gem::RunResult> runs{gem::run_workload(*engine, steps), gem::run_workload(*baseline, steps)};
  const std::string csv = gem::metrics_csv(runs);
  if (csv_out.empty() || csv_out == "-") {
    std::cout << csv;
  } else {
    gem::write_file_bytes(csv_out, csv);
  }
  return kPass;
}

int cmd_snapshot(const std::string& in, const std::string& out) {
  auto state = gem::replay(gem::read_journal(in));
  gem::write_snapshot(out, state);
  std::cout << "snapshot tick " << state.clock.tick << " digest " << gem::to_hex(gem::state_digest(state)) << "\n";
  return kPass;
}

int cmd_restore(const std::string& in, const std::string& journal) {
  auto state = gem::read_snapshot(in);
  const auto digest = gem::state_digest(state);
  std::cout << "restored tick " << state.clock.tick << " digest " << gem::to_hex(digest) << "\n";
  if (!journal.empty()) {
    const auto replayed = gem::state_digest(gem::replay(gem::read_journal(journal)));
    if (replayed != digest) {
      std::cout << "digest differs from journal replay " << gem::to_hex(replayed) << "\n";
      return kCheckFailed;
    }
    std::cout << "matches journal replay\n";
  }
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Governed evolving memory engine"};
  app.require_subcommand(1);

  std::string workload, config, journal_out, system = "gem";
  auto* replay = app.add_subcommand("replay", "Run a workload through the engine and write its journal");
  replay->add_option("--workload", workload, "Workload file (JSON lines)")->required();
  replay->add_option("--config", config, "Engine config (JSON); falls back to GEM_CONFIG");
  replay->add_option("--journal-out", journal_out, "Journal output path");
  replay->add_option("--system", system, "gem or baseline")->check(CLI::IsMember({"gem", "baseline"}));

  std::string journal, probes;
  bool as_json = false;
  auto* audit = app.add_subcommand("audit", "Check C1-C6 over a journal");
  audit->add_option("--journal", journal, "Journal file")->required();
  audit->add_option("--probes", probes, "Probe queries (JSON lines)");
  audit->add_flag("--json", as_json, "Emit the structured report");

  std::string csv_out;
  auto* compare = app.add_subcommand("compare", "Run engine and CRUD baseline side by side");
  compare->add_option("--workload", workload, "Workload file")->required();
  compare->add_option("--config", config, "Engine config; falls back to GEM_CONFIG");
  compare->add_option("--csv-out", csv_out, "CSV output path ('-' for stdout)");

  std::string in, out;
  auto* snapshot = app.add_subcommand("snapshot", "Replay a journal and write a state snapshot");
  snapshot->add_option("--in", in, "Journal file")->required();
  snapshot->add_option("--out", out, "Snapshot output path")->required();

  auto* restore = app.add_subcommand("restore", "Load a snapshot and verify its digest");
  restore->add_option("--in", in, "Snapshot file")->required();
  restore->add_option("--journal", journal, "Also compare with this journal's replay");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*replay) return cmd_replay(workload, config, journal_out, system);
    if (*audit) return cmd_audit(journal, probes, as_json);
    if (*compare) return cmd_compare(workload, config, csv_out);
    if (*snapshot) return cmd_snapshot(in, out);
    if (*restore) return cmd_restore(in, journal);
  } catch (const gem::CorruptionError& e) {
    std::cerr << "corruption: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
