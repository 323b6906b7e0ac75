"""Session logs: ordered JSONL records of one task execution.

Record kinds: sample, input, press, fault. Serialization is canonical
(compact separators, insertion key order preserved) so that
write -> parse -> write is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


class LogError(Exception):
    pass


class MalformedLogLine(LogError):
    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class MissingMarkers(LogError):
    """Log lacks a task start or end marker."""


KINDS = ("sample", "input", "press", "fault")


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, separators=(",", ":"))


def sample_record(t: float, q, tcp, mode: str) -> dict:
    return {
        "kind": "sample",
        "t": float(t),
        "q": [float(v) for v in q],
        "tcp": [float(v) for v in tcp],
        "mode": mode,
    }


def input_record(t: float, event: str, **fields) -> dict:
    rec = {"kind": "input", "t": float(t), "event": event}
    rec.update(fields)
    return rec


def press_record(t: float, button: str, kind: str) -> dict:
    return {"kind": "press", "t": float(t), "button": button, "press": kind}


def fault_record(t: float, reason: str, **fields) -> dict:
    rec = {"kind": "fault", "t": float(t), "reason": reason}
    rec.update(fields)
    return rec


@dataclass
class SessionLog:
    records: list = field(default_factory=list)

    def append(self, rec: dict) -> None:
        if rec.get("kind") not in KINDS:
            raise LogError(f"unknown record kind {rec.get('kind')!r}")
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for rec in self.records:
                f.write(dumps_record(rec))
                f.write("\n")

    def dumps(self) -> str:
        return "".join(dumps_record(r) + "\n" for r in self.records)

    @staticmethod
    def read(path) -> "SessionLog":
        log = SessionLog()
        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    raise MalformedLogLine(path, line_no, f"invalid JSON: {e.msg}")
                if not isinstance(rec, dict) or rec.get("kind") not in KINDS:
                    raise MalformedLogLine(
                        path, line_no, f"unknown record kind {rec.get('kind')!r}"
                    )
                log.records.append(rec)
        return log

    # convenience views -------------------------------------------------

    def of_kind(self, kind: str) -> list:
        return [r for r in self.records if r["kind"] == kind]

    def samples(self) -> list:
        return self.of_kind("sample")

    def presses(self) -> list:
        return self.of_kind("press")

    def faults(self) -> list:
        return self.of_kind("fault")

    def session_meta(self) -> dict | None:
        """The session-opening input event, if present."""
        for r in self.records:
            if r["kind"] == "input" and r.get("event") == "session":
                return r
        return None

    def task_window(self) -> tuple:
        """(t_start, t_end) from the task markers."""
        start = end = None
        for r in self.records:
            if r["kind"] != "input":
                continue
            if r.get("event") == "task_start" and start is None:
                start = r["t"]
            elif r.get("event") == "task_end":
                end = r["t"]
        if start is None or end is None:
            raise MissingMarkers(
                f"task markers missing (start={start!r}, end={end!r})"
            )
        return float(start), float(end)
