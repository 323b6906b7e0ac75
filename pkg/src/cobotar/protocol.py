"""Versioned JSON frame protocol spoken over WebSocket by the session
server, the replay tool, and the operator console.

Every frame carries {"v": 1, "seq": N, "type": tag, ...}; sequence
numbers increase monotonically per direction and receivers reject
out-of-order frames and unknown tags.
"""

from __future__ import annotations

import json

from .config import MODES
from .projection import ACTIONS

PROTOCOL_VERSION = 1

CLIENT_TYPES = ("hand_update", "stick", "pendant", "set_mode", "task")
SERVER_TYPES = ("hello", "state", "press_event", "fault", "error", "task_marker")


class ProtocolError(Exception):
    pass


def encode_frame(seq: int, type_: str, fields: dict) -> str:
    frame = {"v": PROTOCOL_VERSION, "seq": seq, "type": type_}
    frame.update(fields)
    return json.dumps(frame, separators=(",", ":"))


class FrameSender:
    """Outbound framing with its own sequence counter."""

    def __init__(self):
        self._seq = 0

    def encode(self, type_: str, **fields) -> str:
        self._seq += 1
        return encode_frame(self._seq, type_, fields)


def _require_number(frame, key):
    v = frame.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ProtocolError(f"{frame.get('type')}: field {key!r} must be a number")
    return float(v)


def _validate_hand_update(frame: dict) -> None:
    _require_number(frame, "t")
    lm = frame.get("lm")
    if lm is not None:
        if (
            not isinstance(lm, list)
            or len(lm) != 21
            or any(not isinstance(p, list) or len(p) != 3 for p in lm)
        ):
            raise ProtocolError("hand_update: lm must be 21 [x,y,z] landmarks")
        return
    tip = frame.get("fingertip")
    gesture = frame.get("gesture")
    if (
        not isinstance(tip, list)
        or len(tip) != 2
        or not isinstance(gesture, str)
    ):
        raise ProtocolError(
            "hand_update needs either lm or fingertip [x,y] plus gesture"
        )


def _validate_stick(frame: dict) -> None:
    for k in ("x", "y"):
        v = _require_number(frame, k)
        if not -1.0 <= v <= 1.0:
            raise ProtocolError(f"stick: {k}={v} outside [-1, 1]")


def _validate_pendant(frame: dict) -> None:
    if frame.get("action") not in ACTIONS:
        raise ProtocolError(f"pendant: unknown action {frame.get('action')!r}")
    if not isinstance(frame.get("pressed"), bool):
        raise ProtocolError("pendant: pressed must be a boolean")


def _validate_set_mode(frame: dict) -> None:
    if frame.get("mode") not in MODES:
        raise ProtocolError(f"set_mode: unknown mode {frame.get('mode')!r}")


def _validate_task(frame: dict) -> None:
    if frame.get("event") not in ("start", "end"):
        raise ProtocolError(f"task: unknown event {frame.get('event')!r}")


_CLIENT_VALIDATORS = {
    "hand_update": _validate_hand_update,
    "stick": _validate_stick,
    "pendant": _validate_pendant,
    "set_mode": _validate_set_mode,
    "task": _validate_task,
}


def decode_frame(text: str, *, role: str, last_seq: int | None = None) -> dict:
    """Parse and validate one frame arriving FROM the given role.

    Raises ProtocolError on malformed JSON, version or tag trouble, and
    non-increasing sequence numbers.
    """
    if role not in ("client", "server"):
        raise ValueError(f"role must be client or server, got {role!r}")
    try:
        frame = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"malformed JSON frame: {e.msg}")
    if not isinstance(frame, dict):
        raise ProtocolError("frame must be a JSON object")
    if frame.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {frame.get('v')!r}")
    allowed = CLIENT_TYPES if role == "client" else SERVER_TYPES
    tag = frame.get("type")
    if tag not in allowed:
        raise ProtocolError(f"unknown frame type {tag!r}")
    seq = frame.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool):
        raise ProtocolError("seq must be an integer")
    if last_seq is not None and seq <= last_seq:
        raise ProtocolError(f"out-of-order seq {seq} after {last_seq}")
    if role == "client":
        _CLIENT_VALIDATORS[tag](frame)
    return frame


# --- server-side frame payloads ------------------------------------------------


def state_fields(world, gui_world: dict, layout, gui_to_cam, trace_tail) -> dict:
    """Snapshot payload for a state frame."""
    buttons = []
    for b in layout.buttons:
        quad = gui_world[b.id]
        buttons.append(
            {
                "id": b.id,
                "action": b.action,
                "rect_mm": list(b.rect),
                "quad": [[float(v) for v in pt] for pt in quad],
                "active": world.detector.active_button == b.id,
            }
        )
    return {
        "t": world.t,
        "mode": world.mode,
        "q": [float(v) for v in world.ur3_q],
        "tcp": [float(v) for v in world.ur3_tcp.translation],
        "target": {"p": [float(v) for v in world.target.translation]},
        "follower": {"p": [float(v) for v in world.follower.translation]},
        "gui_buttons": buttons,
        "active_button": world.detector.active_button,
        "gui_to_cam": [float(v) for v in gui_to_cam.matrix.reshape(-1)],
        "trace_tail": [[float(x), float(y)] for x, y in trace_tail],
    }
