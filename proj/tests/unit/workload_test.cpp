#include <gtest/gtest.h>

#include "gem/workload.hpp"
#include "test_support.hpp"

namespace gem {
namespace {

std::size_t error_line(const std::string& text) {
  try {
    parse_workload(text);
  } catch (const WorkloadError& e) {
    return e.line();
  }
  return 0;
}

TEST(ParseWorkload, ThreeWeeksShape) {
  const auto steps = testing::three_weeks_steps();
  std::size_t ingests = 0, queries = 0, ticks = 0, asserts = 0;
  for (const auto& s : steps) {
    if (std::holds_alternative<step::Ingest>(s.op)) ++ingests;
    if (std::holds_alternative<step::Query>(s.op)) ++queries;
    if (const auto* t = std::get_if<step::Tick>(&s.op)) ticks += t->count;
    if (std::holds_alternative<step::Assert>(s.op)) ++asserts;
  }
  EXPECT_EQ(ingests, 10u);
  EXPECT_EQ(queries, 3u);
  EXPECT_EQ(ticks, 21u);
  EXPECT_EQ(asserts, 4u);
}

TEST(ParseWorkload, ErrorsNameTheLine) {
  EXPECT_EQ(error_line("# c\n{\"op\":\"tick\"}\n{not json\n"), 3u);
  EXPECT_EQ(error_line("{\"text\":\"x\"}\n"), 1u);
  EXPECT_EQ(error_line("\n\n{\"op\":\"dance\"}\n"), 3u);
  EXPECT_EQ(error_line("{\"op\":\"assert\",\"check\":\"vibes\",\"topic\":\"t\"}\n"), 1u);
  EXPECT_EQ(error_line("{\"op\":\"ingest\",\"facts\":[{\"value\":\"v\"}]}\n"), 1u);
  EXPECT_EQ(error_line("[1,2]\n"), 1u);
  EXPECT_EQ(error_line("{\"op\":\"tick\"}\n"), 0u);
}

TEST(RunWorkload, ThreeWeeksPassesOnEngine) {
  RunResult r;
  auto sys = testing::run_on(make_gem_system(testing::three_weeks_config()), testing::three_weeks_steps(), &r);
  EXPECT_EQ(r.failures, 0u);
  for (const auto& o : r.outcomes) EXPECT_TRUE(o.ok) << "line " << o.line << ": " << o.message;
  EXPECT_EQ(r.rows.back().stale_answers, 0u);
  EXPECT_EQ(r.rows.back().lost_answers, 0u);
  EXPECT_GT(r.rows.back().salience_delta_sum, 0.0);
}

TEST(RunWorkload, ThreeWeeksFailsOnBaseline) {
  RunResult r;
  testing::run_on(make_baseline_system(testing::three_weeks_config()), testing::three_weeks_steps(), &r);
  EXPECT_GT(r.failures, 0u);
  EXPECT_GE(r.rows.back().stale_answers, 1u);
  EXPECT_GE(r.rows.back().lost_answers, 1u);
  EXPECT_EQ(r.rows.back().salience_delta_sum, 0.0);
}

TEST(RunWorkload, FailingAssertNamesLine) {
  const auto steps = parse_workload(
      "{\"op\":\"ingest\",\"text\":\"Owner: Alice\",\"topic_hint\":\"t\",\"facts\":[{\"field\":\"Owner\",\"value\":\"Alice\"}]}\n"
      "# comment\n"
      "{\"op\":\"assert\",\"check\":\"current_value\",\"topic\":\"t\",\"field\":\"Owner\",\"equals\":\"Bob\"}\n"
      "{\"op\":\"assert\",\"check\":\"footprint_le\",\"limit\":0}\n");
  RunResult r;
  testing::run_on(make_gem_system(EngineConfig{}), steps, &r);
  ASSERT_EQ(r.failures, 2u);
  EXPECT_EQ(r.outcomes[1].line, 3u);
  EXPECT_FALSE(r.outcomes[1].ok);
  EXPECT_NE(r.outcomes[1].message.find("Alice"), std::string::npos);
  EXPECT_EQ(r.outcomes[2].line, 4u);
}

TEST(MetricsCsv, HeaderAndRows) {
  RunResult a, b;
  testing::run_on(make_gem_system(testing::three_weeks_config()), testing::three_weeks_steps(), &a);
  testing::run_on(make_baseline_system(testing::three_weeks_config()), testing::three_weeks_steps(), &b);
  const std::string csv = metrics_csv({a, b});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "system,tick,footprint,stale_answers,lost_answers,salience_delta_sum");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 1 + a.rows.size() + b.rows.size());
  EXPECT_NE(csv.find("\ngem,"), std::string::npos);
  EXPECT_NE(csv.find("\nbaseline,"), std::string::npos);
  EXPECT_EQ(csv, metrics_csv({a, b}));
}

TEST(LoadProbes, QueryObjectsAndWorkloadQueries) {
  EXPECT_EQ(testing::three_weeks_probes().size(), 3u);
  const auto from_workload = load_probes(testing::workload_dir() / "three_weeks.workload");
  EXPECT_EQ(from_workload.size(), 3u);
}

}  // namespace
}  // namespace gem
