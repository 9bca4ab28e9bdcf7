#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gem/salience.hpp"

namespace gem {

struct MemoryState;

enum class EventKind { FieldUpdated, TopicCreated, TopicMerged, RetrievalPerformed, Tick, PreCommit };

const char* to_string(EventKind e);
std::optional<EventKind> event_kind_from_string(std::string_view s);

// Names a condition or action may refer to. The first four are bound by the
// triggering event; the last two are derived from the state being checked.
enum class Variable {
  UpdatedField,
  UpdatedTopic,
  DependentTopic,
  AccessedTopic,
  SupersededCurrent,
  AttenuationCandidate,
};

const char* to_string(Variable v);
std::optional<Variable> variable_from_string(std::string_view s);

// A declared variable or a literal topic id.
struct Target {
  std::variant<Variable, std::string> ref;

  bool is_variable() const { return std::holds_alternative<Variable>(ref); }
  bool operator==(const Target&) const = default;
};

struct Condition {
  enum class Kind { Exists, SalienceBelow, FootprintAbove, FieldIs, TopicArchived, Not, And, Or };

  Kind kind = Kind::Exists;
  Variable variable = Variable::DependentTopic;  // Exists
  Target target;                                 // SalienceBelow, TopicArchived
  double threshold = 0.0;                        // SalienceBelow
  std::optional<std::uint64_t> footprint_limit;  // FootprintAbove; nullopt means beta
  std::string field;                             // FieldIs
  std::vector<Condition> children;               // Not: 1, And/Or: 2

  bool operator==(const Condition&) const = default;

  static Condition exists(Variable v);
  static Condition salience_below(Target t, double threshold);
  static Condition footprint_above(std::optional<std::uint64_t> limit);
  static Condition field_is(std::string name);
  static Condition topic_archived(Target t);
  static Condition negate(Condition c);
  static Condition both(Condition a, Condition b);
  static Condition either(Condition a, Condition b);
};

struct Action {
  enum class Kind { FlagForRevision, RejectTransition, Attenuate, Archive, Noop };

  Kind kind = Kind::Noop;
  Target target;        // FlagForRevision, Attenuate, Archive
  std::string message;  // RejectTransition

  bool operator==(const Action&) const = default;
};

struct Policy {
  std::string name;
  EventKind on_event = EventKind::FieldUpdated;
  Condition condition;
  Action action;
  std::vector<std::string> evidence;

  bool operator==(const Policy&) const = default;
};

class PolicyParseError : public std::runtime_error {
 public:
  PolicyParseError(const std::string& message, std::size_t line, std::size_t column, std::string token);

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& token() const { return token_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string token_;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exactly one POLICY block.
Policy parse_policy(std::string_view text);

// Zero or more POLICY blocks with '#' line comments. Names must be unique.
std::vector<Policy> parse_policy_file(std::string_view text);

std::string render_policy(const Policy& p);
std::string render_condition(const Condition& c);
std::string render_action(const Action& a);

// Values bound by the triggering event. Unset means unbound.
struct EventBindings {
  std::optional<std::string> updated_topic;
  std::optional<std::string> updated_field;
  std::optional<std::string> accessed_topic;
};

struct EvalContext {
  SalienceParams params;
  double beta = 200.0;
  EventBindings bindings;
};

bool evaluate_condition(const Condition& cond, const MemoryState& state, const EvalContext& ctx);

// Topic ids an action target denotes under the given bindings.
std::vector<std::string> resolve_target(const Target& target, const MemoryState& state, const EvalContext& ctx);

// Shipped defaults: propagate-on-change, the superseded-value and
// bounded-active-state pre-commit guards, and tick-driven attenuation.
std::vector<Policy> default_policy_set();

inline constexpr std::string_view kPropagateOnChangePolicy =
    "POLICY propagate-on-change\n"
    "  ON   field_updated\n"
    "  WHEN EXISTS dependent_topic\n"
    "  DO   flag_for_revision(dependent_topic)\n"
    "  WITH evidence = {updated_field, timestamp}\n";

}  // namespace gem
