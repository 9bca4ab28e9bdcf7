#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gem/policy.hpp"
#include "gem/salience.hpp"

namespace gem {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// beta(n) = constant + slope * n, n = committed client interactions.
struct BetaSpec {
  double constant = 200.0;
  double slope = 0.0;

  double at(std::uint64_t n) const { return constant + slope * static_cast<double>(n); }
  bool operator==(const BetaSpec&) const = default;
};

// "cause_topic.field -> dependent_topic.field : transform". '*' matches any
// topic id or field name.
struct DependencyRule {
  std::string cause_topic;
  std::string cause_field;
  std::string dependent_topic;
  std::string dependent_field;
  std::string transform;

  bool matches_cause(std::string_view topic, std::string_view field) const;
  bool matches_dependent(std::string_view topic, std::string_view field) const;
  bool operator==(const DependencyRule&) const = default;
};

inline constexpr std::string_view kShiftAnnotation = "shift-annotation";

std::vector<DependencyRule> parse_dependency_rules(std::string_view text);
std::string render_dependency_rules(const std::vector<DependencyRule>& rules);

struct EngineConfig {
  SalienceParams salience;
  double tau_topic = 0.35;
  double tau_dup = 0.9;
  std::size_t k_topics = 3;
  BetaSpec beta;
  std::size_t n_promote = 3;
  std::size_t m_promote = 5;
  std::size_t baseline_capacity = 5;

  // Empty means default_policy_set().
  std::vector<Policy> policies;
  std::vector<DependencyRule> dependency_rules;

  std::vector<Policy> effective_policies() const;
};

// Throws ConfigError on any violated invariant.
void validate(const EngineConfig& config);

// JSON config; policy_files and dependency_rules paths are resolved against
// the config file's directory.
EngineConfig load_config(const std::filesystem::path& path);
EngineConfig config_from_json_text(std::string_view text, const std::filesystem::path& base_dir);

}  // namespace gem
