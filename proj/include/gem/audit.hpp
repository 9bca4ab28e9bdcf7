#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gem/engine.hpp"

namespace gem {

struct Violation {
  std::uint64_t tick = 0;
  std::string subject;  // "topic" or "topic.field"
  std::string detail;

  auto operator<=>(const Violation&) const = default;
};

// Findings per correctness condition; index 0 holds C1.
struct ViolationReport {
  std::array<std::vector<Violation>, 6> conditions;

  std::size_t total(int condition) const { return conditions.at(static_cast<std::size_t>(condition - 1)).size(); }
  std::size_t total() const;
  bool pass() const { return total() == 0; }
};

// Replays the journal and checks C1-C6 on every committed transition.
// Probes run in default mode against each post-commit snapshot.
// Throws CorruptionError when the journal does not replay.
ViolationReport audit(const Journal& journal, const std::vector<Query>& probes);

// Revision flags raised across an association edge, or raised as an
// extension step without a matching extension edge.
std::size_t association_traversals(const Journal& journal);

// "PASS C1–C6: 0 violations", or a FAIL header, per-condition totals and
// one line per violation ordered by (condition, tick, subject).
std::string render_report(const ViolationReport& r);

// Canonical JSON object: c1..c6 violation lists, pass and total.
std::string report_to_json(const ViolationReport& r);

}  // namespace gem
