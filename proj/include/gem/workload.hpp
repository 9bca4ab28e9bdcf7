#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gem/baseline.hpp"
#include "gem/engine.hpp"

namespace gem {

class WorkloadError : public std::runtime_error {
 public:
  WorkloadError(const std::string& message, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Expectation {
  std::string value;
  std::optional<TopicId> topic;
  std::optional<std::string> field;
};

struct Check {
  enum class Kind { CurrentValue, FootprintLe, UnitArchived, TierIs };

  Kind kind = Kind::CurrentValue;
  TopicId topic;
  std::string field;               // empty for whole-topic checks
  std::string value;               // CurrentValue
  std::optional<std::size_t> limit;  // FootprintLe; nullopt means beta
  Tier tier = Tier::Active;        // TierIs
};

namespace step {
struct Ingest {
  FactBundle bundle;
};
struct Query {
  gem::Query query;
  std::optional<Expectation> expect;
};
struct Tick {
  std::size_t count = 1;
};
struct Assert {
  Check check;
};
}  // namespace step

struct WorkloadStep {
  std::size_t line = 0;
  std::variant<step::Ingest, step::Query, step::Tick, step::Assert> op;
};

// One JSON object per line; blank lines and '#' lines are skipped.
std::vector<WorkloadStep> parse_workload(std::string_view text);
std::vector<WorkloadStep> load_workload(const std::filesystem::path& path);

// Probe queries: the query steps of a workload file, or one JSON query
// object per line.
std::vector<Query> load_probes(const std::filesystem::path& path);

// Common face of the engine and the CRUD baseline for workload runs.
class MemorySystem {
 public:
  virtual ~MemorySystem() = default;
  virtual std::string name() const = 0;
  virtual SubmitOutcome submit(const EngineEvent& event) = 0;
  virtual const MemoryState& state() const = 0;
  virtual const Journal& journal() const = 0;
  // Units currently occupying active capacity.
  virtual std::size_t footprint() const = 0;
};

std::unique_ptr<MemorySystem> make_gem_system(EngineConfig config);
std::unique_ptr<MemorySystem> make_baseline_system(EngineConfig config);

struct StepOutcome {
  std::size_t line = 0;
  std::string op;
  bool ok = true;
  std::string message;
};

struct MetricsRow {
  std::string system;
  std::uint64_t tick = 0;
  std::size_t footprint = 0;
  std::size_t stale_answers = 0;
  std::size_t lost_answers = 0;
  double salience_delta_sum = 0.0;
};

struct RunResult {
  std::vector<StepOutcome> outcomes;
  std::vector<MetricsRow> rows;  // one per non-assert step
  std::size_t failures = 0;
};

RunResult run_workload(MemorySystem& system, const std::vector<WorkloadStep>& steps);

inline constexpr std::string_view kCompareHeader = "system,tick,footprint,stale_answers,lost_answers,salience_delta_sum";

// Header plus the rows of every run, in order.
std::string metrics_csv(const std::vector<RunResult>& runs);

}  // namespace gem
