import os
from pathlib import Path

import pytest

import gem

WORKLOADS = Path(os.environ.get("GEM_WORKLOADS", Path(__file__).resolve().parents[2] / "workloads"))
THREE_WEEKS = WORKLOADS / "three_weeks.workload"
THREE_WEEKS_CONFIG = WORKLOADS / "three_weeks.config.json"
QUESTION = "What is the deadline for the Website Redesign?"


def deadline(engine, value):
    return engine.ingest(
        f"Website redesign Deadline: {value}",
        facts=[{"field": "Deadline", "value": value, "source": "py"}],
        topic_hint="website-redesign",
    )


def test_update_is_answered_and_history_kept():
    e = gem.Engine()
    assert deadline(e, "March 15").committed
    assert deadline(e, "April 20").committed
    out = e.query(QUESTION)
    assert out.committed
    assert out.answers[0]["value"] == "April 20"
    assert e.current("website-redesign", "Deadline") == "April 20"
    assert e.history("website-redesign", "Deadline") == ["March 15", "April 20"]
    assert {"topic": "website-redesign", "field": "Deadline"} in out.accessed


def test_retrieval_writes_salience():
    e = gem.Engine()
    deadline(e, "March 15")
    before = e.digest()
    e.query(topic="website-redesign", field="Deadline")
    assert e.digest() != before
    assert e.state()["topics"]


def test_footprint_cap_and_journal_replay():
    e = gem.Engine({"beta": 3})
    for name in "ABCDE":
        assert e.ingest(name, facts=[{"field": name, "value": "1"}], topic_hint="t").committed
    assert e.footprint() <= 3
    journal = e.journal()
    assert journal[:4] == b"GEMJ"
    assert gem.replay_digest(journal) == e.digest()
    assert gem.snapshot_digest(e.snapshot()) == e.digest()
    hidden = [n for n in "ABCDE" if e.current("t", n) is None]
    assert len(hidden) == 2
    assert all(e.lookup("t", n) == "1" for n in hidden)


def test_three_weeks_engine_passes_and_baseline_fails():
    failures, csv, journal = gem.run_workload(THREE_WEEKS, THREE_WEEKS_CONFIG)
    assert failures == 0
    assert csv.startswith("system,tick,footprint,stale_answers,lost_answers,salience_delta_sum\n")
    report = gem.audit(journal, [QUESTION])
    assert report.passed, report.text

    failures, _, journal = gem.run_workload(THREE_WEEKS, THREE_WEEKS_CONFIG, system="baseline")
    assert failures > 0
    report = gem.audit(journal, [QUESTION])
    assert not report.passed
    assert report.count(1) >= 1
    assert report.count(6) == 3


def test_runs_are_byte_identical():
    assert gem.run_workload(THREE_WEEKS, THREE_WEEKS_CONFIG)[2] == gem.run_workload(THREE_WEEKS, THREE_WEEKS_CONFIG)[2]


def test_policy_round_trip_and_errors():
    assert gem.round_trip_policy(gem.PROPAGATE_ON_CHANGE_POLICY) == gem.PROPAGATE_ON_CHANGE_POLICY
    with pytest.raises(gem.PolicyParseError, match="bogus_event"):
        gem.round_trip_policy("POLICY p ON bogus_event WHEN EXISTS dependent_topic DO noop")


def test_errors_map_to_python_exceptions():
    with pytest.raises(gem.CorruptionError):
        gem.replay_digest(b"GEMJ\x01")
    with pytest.raises(gem.ConfigError):
        gem.Engine({"betta": 3})
    with pytest.raises(ValueError):
        gem.Engine(system="nope")
    e = gem.Engine()
    with pytest.raises(gem.UnitLookupError):
        e.history("missing", "Field")
    out = e.query(topic="missing", field="Field")
    assert not out.committed
    assert out.abort_reason.startswith("unknown-unit")
