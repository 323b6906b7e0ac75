"""Re-emit a session log as a protocol frame stream.

Replay preserves the log's relative timing (divided by the speed
multiplier) and can simultaneously reconstruct a session log from the
emitted frames; the reconstruction carries everything the metrics
pipeline reads, so metrics(capture(replay(log))) equals metrics(log).
"""

from __future__ import annotations

import sys
import time

from .protocol import FrameSender
from .sessionlog import (
    SessionLog,
    fault_record,
    input_record,
    press_record,
    sample_record,
)


def frames_from_log(log: SessionLog) -> list:
    """(t, type, fields) triples in log order.

    Command input records stay robot-side and are not replayed; task
    markers travel as dedicated marker frames.
    """
    out = []
    for rec in log.records:
        kind = rec["kind"]
        if kind == "sample":
            out.append(
                (
                    rec["t"],
                    "state",
                    {
                        "t": rec["t"],
                        "mode": rec.get("mode"),
                        "q": rec["q"],
                        "tcp": rec["tcp"],
                    },
                )
            )
        elif kind == "press":
            out.append(
                (
                    rec["t"],
                    "press_event",
                    {"t": rec["t"], "button": rec["button"], "kind": rec["press"]},
                )
            )
        elif kind == "fault":
            fields = {k: v for k, v in rec.items() if k != "kind"}
            out.append((rec["t"], "fault", fields))
        elif kind == "input":
            event = rec.get("event")
            if event == "session":
                meta = {
                    k: v for k, v in rec.items() if k not in ("kind", "t", "event")
                }
                out.append((rec["t"], "hello", {"t": rec["t"], "session": meta}))
            elif event in ("task_start", "task_end"):
                out.append(
                    (
                        rec["t"],
                        "task_marker",
                        {"t": rec["t"], "event": event.removeprefix("task_")},
                    )
                )
    return out


def record_from_frame(type_: str, fields: dict):
    """Inverse of frames_from_log for one frame; None when the frame
    carries nothing the log format stores."""
    if type_ == "state":
        return sample_record(fields["t"], fields["q"], fields["tcp"], fields["mode"])
    if type_ == "press_event":
        return press_record(fields["t"], fields["button"], fields["kind"])
    if type_ == "fault":
        extra = {k: v for k, v in fields.items() if k not in ("t", "reason")}
        return fault_record(fields["t"], fields["reason"], **extra)
    if type_ == "hello":
        return input_record(fields["t"], "session", **fields["session"])
    if type_ == "task_marker":
        return input_record(fields["t"], "task_" + fields["event"])
    return None


def run_replay(
    log_path,
    speed: float,
    out=None,
    capture_path=None,
    sleep: bool = True,
) -> SessionLog:
    """Stream the log's frames to `out`; returns the captured log."""
    if speed <= 0:
        raise ValueError(f"speed multiplier must be positive, got {speed}")
    if out is None:
        out = sys.stdout
    log = SessionLog.read(log_path)
    sender = FrameSender()
    captured = SessionLog()
    t_prev = None
    for t, type_, fields in frames_from_log(log):
        if sleep and t_prev is not None and t > t_prev:
            time.sleep((t - t_prev) / speed)
        t_prev = t
        out.write(sender.encode(type_, **fields))
        out.write("\n")
        rec = record_from_frame(type_, fields)
        if rec is not None:
            captured.append(rec)
    if capture_path is not None:
        captured.write(capture_path)
    return captured
