"""Append-only JSONL search traces and replay comparison.

One trace line per event: ``{"elapsed": …, "payload": {…}, "phase": …,
"seq": …}`` with keys sorted and stable separators, so that two runs of the
same deterministic search produce byte-identical files once the wall-clock
``elapsed`` field is masked.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvalidArgumentError, TraceIOError

PHASES = frozenset(
    {
        "header",
        "checklist_init",
        "selection",
        "subquery_proposed",
        "retrieval",
        "summarization",
        "reward",
        "feedback_applied",
        "backprop",
        "memory_admit",
        "memory_reject",
        "terminate",
        "answer",
        "warning",
    }
)


@dataclass
class TraceEvent:
    seq: int
    phase: str
    payload: dict
    elapsed: float

    def to_dict(self) -> dict:
        return {"seq": self.seq, "phase": self.phase, "elapsed": self.elapsed, "payload": self.payload}


def event_line(event: TraceEvent) -> str:
    return json.dumps(event.to_dict(), ensure_ascii=False, sort_keys=True, separators=(",", ":"))


class TraceSink:
    """Stamps events with a per-search sequence number and elapsed seconds."""

    def __init__(self):
        self._seq = 0
        self._start = time.monotonic()

    @property
    def path(self) -> str | None:
        return None

    def emit(self, phase: str, payload: dict) -> TraceEvent:
        if phase not in PHASES:
            raise InvalidArgumentError(f"unknown trace phase {phase!r}")
        event = TraceEvent(
            seq=self._seq, phase=phase, payload=payload, elapsed=time.monotonic() - self._start
        )
        self._seq += 1
        self._write(event)
        return event

    def _write(self, event: TraceEvent) -> None:  # pragma: no cover - overridden
        raise NotImplementedError

    def close(self) -> None:
        pass


class MemoryTraceSink(TraceSink):
    def __init__(self):
        super().__init__()
        self.events: list[TraceEvent] = []

    def _write(self, event: TraceEvent) -> None:
        self.events.append(event)


class JsonlTraceSink(TraceSink):
    def __init__(self, path: str | Path):
        super().__init__()
        self._path = str(path)
        try:
            self._fh = open(path, "w", encoding="utf-8")
        except OSError as exc:
            raise TraceIOError(f"cannot open trace file {path}: {exc}") from exc

    @property
    def path(self) -> str:
        return self._path

    def _write(self, event: TraceEvent) -> None:
        try:
            self._fh.write(event_line(event) + "\n")
            self._fh.flush()
        except OSError as exc:  # pragma: no cover - hard to provoke reliably
            raise TraceIOError(f"cannot write trace file {self._path}: {exc}") from exc

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "JsonlTraceSink":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def load_trace(path: str | Path) -> list[TraceEvent]:
    events = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise TraceIOError(f"{path}:{lineno}: bad trace line: {exc}") from exc
                events.append(
                    TraceEvent(
                        seq=raw["seq"],
                        phase=raw["phase"],
                        payload=raw["payload"],
                        elapsed=raw["elapsed"],
                    )
                )
    except OSError as exc:
        raise TraceIOError(f"cannot read trace file {path}: {exc}") from exc
    return events


def _masked(events: Iterable[TraceEvent]) -> list[dict]:
    masked = []
    for event in events:
        d = event.to_dict()
        d["elapsed"] = None
        masked.append(d)
    return masked


def _as_events(trace: "str | Path | Sequence[TraceEvent]") -> list[TraceEvent]:
    if isinstance(trace, (str, Path)):
        return load_trace(trace)
    return list(trace)


def compare_traces(
    trace_a: "str | Path | Sequence[TraceEvent]",
    trace_b: "str | Path | Sequence[TraceEvent]",
) -> int | None:
    """First diverging sequence number after masking elapsed, None if equal."""
    a = _masked(_as_events(trace_a))
    b = _masked(_as_events(trace_b))
    for i, (ea, eb) in enumerate(zip(a, b)):
        if ea != eb:
            return i
    if len(a) != len(b):
        return min(len(a), len(b))
    return None


def replay_verify(
    trace_a: "str | Path | Sequence[TraceEvent]",
    trace_b: "str | Path | Sequence[TraceEvent]",
) -> bool:
    """Whether two traces are event-for-event identical modulo timing."""
    return compare_traces(trace_a, trace_b) is None
