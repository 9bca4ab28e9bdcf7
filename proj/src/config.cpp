#include "gem/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "gem/serialize.hpp"
#include <nlohmann/json.hpp>

namespace gem {

using json = nlohmann::json;

namespace {

bool glob_match(std::string_view pattern, std::string_view value) { return pattern == "*" || pattern == value; }

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::pair<std::string, std::string> split_unit(const std::string& unit, std::size_t line) {
  auto dot = unit.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == unit.size()) {
    throw ConfigError("dependency rule line " + std::to_string(line) + ": expected topic.field, got '" + unit + "'");
  }
  return {trim(unit.substr(0, dot)), trim(unit.substr(dot + 1))};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

bool DependencyRule::matches_cause(std::string_view topic, std::string_view field) const {
  return glob_match(cause_topic, topic) && glob_match(cause_field, field);
}

bool DependencyRule::matches_dependent(std::string_view topic, std::string_view field) const {
  return glob_match(dependent_topic, topic) && glob_match(dependent_field, field);
}

std::vector<DependencyRule> parse_dependency_rules(std::string_view text) {
  std::vector<DependencyRule> rules;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    std::string l = trim(raw);
    if (l.empty()) continue;
    auto arrow = l.find("->");
    auto colon = l.rfind(':');
    if (arrow == std::string::npos || colon == std::string::npos || colon < arrow) {
      throw ConfigError("dependency rule line " + std::to_string(line) +
                        ": expected 'cause_topic.field -> dependent_topic.field : transform'");
    }
    DependencyRule r;
    std::tie(r.cause_topic, r.cause_field) = split_unit(trim(l.substr(0, arrow)), line);
    std::tie(r.dependent_topic, r.dependent_field) = split_unit(trim(l.substr(arrow + 2, colon - arrow - 2)), line);
    r.transform = trim(l.substr(colon + 1));
    if (r.transform != kShiftAnnotation) {
      throw ConfigError("dependency rule line " + std::to_string(line) + ": unknown transform '" + r.transform + "'");
    }
    rules.push_back(std::move(r));
  }
  return rules;
}

std::string render_dependency_rules(const std::vector<DependencyRule>& rules) {
  std::string out;
  for (const auto& r : rules) {
    out += r.cause_topic + "." + r.cause_field + " -> " + r.dependent_topic + "." + r.dependent_field + " : " +
           r.transform + "\n";
  }
  return out;
}

std::vector<Policy> EngineConfig::effective_policies() const {
  return policies.empty() ? default_policy_set() : policies;
}

void validate(const EngineConfig& config) {
  try {
    validate(config.salience);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(config.tau_topic >= -1.0 && config.tau_topic <= 1.0)) throw ConfigError("tau_topic must lie in [-1, 1]");
  if (!(config.tau_dup >= -1.0 && config.tau_dup <= 1.0)) throw ConfigError("tau_dup must lie in [-1, 1]");
  if (config.k_topics == 0) throw ConfigError("k_topics must be at least 1");
  if (config.beta.constant < 0.0 || config.beta.slope < 0.0) throw ConfigError("beta must be non-negative and non-decreasing");
  if (config.n_promote == 0) throw ConfigError("n_promote must be at least 1");
  if (config.baseline_capacity == 0) throw ConfigError("baseline_capacity must be at least 1");
  std::set<std::string> names;
  for (const auto& p : config.policies) {
    if (!names.insert(p.name).second) throw ConfigError("duplicate policy name '" + p.name + "'");
  }
}

EngineConfig config_from_json_text(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  static const std::set<std::string> kKeys = {
      "salience", "tau_topic", "tau_dup", "k_topics", "beta", "n_promote", "m_promote", "baseline_capacity",
      "policy_files", "policies", "dependency_rules", "dependency_rules_text"};
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  EngineConfig c;
  try {
    if (j.contains("salience")) c.salience = salience_params_from_json(j.at("salience"));
    c.tau_topic = j.value("tau_topic", c.tau_topic);
    c.tau_dup = j.value("tau_dup", c.tau_dup);
    c.k_topics = j.value("k_topics", c.k_topics);
    c.n_promote = j.value("n_promote", c.n_promote);
    c.m_promote = j.value("m_promote", c.m_promote);
    c.baseline_capacity = j.value("baseline_capacity", c.baseline_capacity);
    if (j.contains("beta")) c.beta = beta_from_json(j.at("beta"));

    std::string policy_text;
    if (j.contains("policy_files")) {
      for (const auto& f : j.at("policy_files")) policy_text += read_file(base_dir / f.get<std::string>()) + "\n";
    }
    if (j.contains("policies")) policy_text += j.at("policies").get<std::string>();
    if (!policy_text.empty()) c.policies = parse_policy_file(policy_text);

    if (j.contains("dependency_rules")) {
      c.dependency_rules = parse_dependency_rules(read_file(base_dir / j.at("dependency_rules").get<std::string>()));
    }
    if (j.contains("dependency_rules_text")) {
      auto more = parse_dependency_rules(j.at("dependency_rules_text").get<std::string>());
      c.dependency_rules.insert(c.dependency_rules.end(), more.begin(), more.end());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  } catch (const PolicyParseError& e) {
    throw ConfigError(e.what());
  }
  validate(c);
  return c;
}

EngineConfig load_config(const std::filesystem::path& path) {
  return config_from_json_text(read_file(path), path.parent_path());
}

}  // namespace gem
