"""Python front end for the governed evolving memory engine."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from . import _gem
from ._gem import (
    ConfigError,
    CorruptionError,
    UnitLookupError,
    PolicyParseError,
    WorkloadError,
    PROPAGATE_ON_CHANGE_POLICY,
    replay_digest,
    round_trip_policy,
    snapshot_digest,
)

__all__ = [
    "AuditReport",
    "ConfigError",
    "CorruptionError",
    "Engine",
    "PROPAGATE_ON_CHANGE_POLICY",
    "UnitLookupError",
    "Outcome",
    "PolicyParseError",
    "WorkloadError",
    "audit",
    "replay_digest",
    "round_trip_policy",
    "run_workload",
    "snapshot_digest",
]


@dataclass
class Outcome:
    committed: bool
    abort_reason: str = ""
    answers: list[dict[str, Any]] = field(default_factory=list)
    accessed: list[dict[str, str]] = field(default_factory=list)


def _config_args(config: Optional[dict | str | os.PathLike]) -> tuple[str, str]:
    if config is None:
        return "{}", "."
    if isinstance(config, dict):
        return json.dumps(config), "."
    path = os.fspath(config)
    with open(path, encoding="utf-8") as fh:
        return fh.read(), os.path.dirname(os.path.abspath(path))


class Engine:
    """A memory system, either the governed engine or the CRUD baseline."""

    def __init__(self, config: Optional[dict | str | os.PathLike] = None, system: str = "gem"):
        text, base = _config_args(config)
        self._sys = _gem.System(system, text, base)

    @property
    def name(self) -> str:
        return self._sys.name

    def _submit(self, event: dict) -> Outcome:
        raw = json.loads(self._sys.submit(json.dumps(event)))
        out = raw.get("output") or {}
        return Outcome(
            committed=raw["committed"],
            abort_reason=raw["abort_reason"],
            answers=out.get("answers", []),
            accessed=out.get("accessed", []),
        )

    def ingest(
        self,
        text: str,
        facts: Iterable[dict[str, str]] = (),
        topic_hint: Optional[str] = None,
        links: Iterable[dict[str, Any]] = (),
    ) -> Outcome:
        bundle: dict[str, Any] = {"text": text, "facts": list(facts), "links": list(links)}
        if topic_hint is not None:
            bundle["topic_hint"] = topic_hint
        return self._submit({"op": "ingest", "bundle": bundle})

    def query(
        self,
        text: str = "",
        *,
        mode: str = "default",
        topic: Optional[str] = None,
        field: Optional[str] = None,
        as_of: Optional[int] = None,
        depth: int = 1,
    ) -> Outcome:
        q: dict[str, Any] = {"text": text, "mode": mode, "depth": depth}
        if as_of is not None:
            q["as_of"] = as_of
        if topic is not None and field is not None:
            q["explicit"] = {"topic": topic, "field": field}
        elif topic is not None:
            q["root"] = topic
        return self._submit({"op": "retrieve", "query": q})

    def tick(self, count: int = 1) -> None:
        for _ in range(count):
            self._submit({"op": "tick"})

    def current(self, topic: str, field: str) -> Optional[str]:
        """Current value of an active unit; None once hidden or archived."""
        return self._sys.current(topic, field)

    def lookup(self, topic: str, field: str) -> Optional[str]:
        """Current value regardless of attenuation."""
        return self._sys.lookup(topic, field)

    def history(self, topic: str, field: str) -> list[str]:
        return self._sys.history(topic, field)

    def digest(self) -> str:
        return self._sys.digest()

    def footprint(self) -> int:
        return self._sys.footprint()

    @property
    def clock(self) -> int:
        return self._sys.tick()

    def state(self) -> dict:
        return json.loads(self._sys.state_json())

    def journal(self) -> bytes:
        return self._sys.journal()

    def snapshot(self) -> bytes:
        return self._sys.snapshot()


@dataclass
class AuditReport:
    violations: dict[str, list[dict[str, Any]]]
    text: str

    @property
    def passed(self) -> bool:
        return all(not v for v in self.violations.values())

    def count(self, condition: int) -> int:
        return len(self.violations[f"c{condition}"])


def audit(journal: bytes, probes: Iterable[str] = ()) -> AuditReport:
    raw, text = _gem.audit(journal, list(probes))
    data = json.loads(raw)
    return AuditReport({f"c{i}": data[f"c{i}"] for i in range(1, 7)}, text)


def run_workload(path: str | os.PathLike, config=None, system: str = "gem") -> tuple[int, str, bytes]:
    """Runs a workload file; returns (failed checks, metrics CSV, journal bytes)."""
    text, base = _config_args(config)
    return _gem.run_workload(os.fspath(path), system, text, base)
