"""Hand-gesture classification over 21-landmark frames and the
debounced button-press detector.

A press fires on a stable open-hand to extended-index transition while
the index fingertip, mapped through the camera-to-GUI homography, lies
inside a button region. The button stays active (level-triggered) while
the extended-index gesture holds in-region.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .projection import GuiLayout, Homography, apply_homography, hit_test

WRIST = 0
INDEX_TIP = 8
# standard 21-point hand topology: per-finger (MCP, tip) landmark indices
FINGERS = ("thumb", "index", "middle", "ring", "pinky")
MCP_INDEX = {"thumb": 2, "index": 5, "middle": 9, "ring": 13, "pinky": 17}
TIP_INDEX = {"thumb": 4, "index": 8, "middle": 12, "ring": 16, "pinky": 20}

DEFAULT_EXT_RATIO = 1.6
DEFAULT_DEBOUNCE_N = 3


class GestureLabel(str, enum.Enum):
    PALM = "Palm"
    ONE = "One"
    TWO = "Two"
    THREE = "Three"
    FOUR = "Four"
    FIST = "Fist"
    THUMB = "Thumb"
    PINKY = "Pinky"
    UNKNOWN = "Unknown"


class PressKind(str, enum.Enum):
    ACTIVATED = "activated"
    RELEASED = "released"


@dataclass(frozen=True)
class HandFrame:
    """One timestamped hand observation.

    Landmarks are (x, y, z) with x, y in normalized image coordinates
    and z a unitless relative depth.
    """

    timestamp: float
    landmarks: np.ndarray

    def __post_init__(self):
        lm = np.asarray(self.landmarks, dtype=float)
        if lm.shape != (21, 3):
            raise ValueError(f"expected 21 landmarks of (x,y,z), got shape {lm.shape}")
        xy = lm[:, :2]
        if xy.min() < 0.0 or xy.max() > 1.0:
            raise ValueError("landmark x,y must lie in [0,1]")
        object.__setattr__(self, "landmarks", lm)

    @staticmethod
    def from_dict(doc: dict) -> "HandFrame":
        return HandFrame(float(doc["t"]), np.asarray(doc["lm"], dtype=float))

    @staticmethod
    def from_json_line(line: str) -> "HandFrame":
        return HandFrame.from_dict(json.loads(line))

    def to_dict(self) -> dict:
        return {"t": self.timestamp, "lm": self.landmarks.tolist()}


def _extended_fingers(lm: np.ndarray, ext_ratio: float) -> dict:
    """Finger extension by 2D distance ratio: a finger is extended when
    its tip sits ext_ratio times further from the wrist than its MCP."""
    wrist = lm[WRIST, :2]
    out = {}
    for f in FINGERS:
        tip = np.linalg.norm(lm[TIP_INDEX[f], :2] - wrist)
        mcp = np.linalg.norm(lm[MCP_INDEX[f], :2] - wrist)
        out[f] = tip > ext_ratio * mcp
    return out


def classify_gesture(h: HandFrame, ext_ratio: float = DEFAULT_EXT_RATIO) -> GestureLabel:
    """Deterministic label from landmark distance ratios.

    Scale and translation invariant in the image plane: only the
    tip/MCP distance ratios relative to the wrist enter the decision.
    """
    ext = _extended_fingers(h.landmarks, ext_ratio)
    n = sum(ext.values())
    extended = {f for f, e in ext.items() if e}
    if n == 5:
        return GestureLabel.PALM
    if n == 0:
        return GestureLabel.FIST
    if extended == {"index"}:
        return GestureLabel.ONE
    if extended == {"thumb"}:
        return GestureLabel.THUMB
    if extended == {"pinky"}:
        return GestureLabel.PINKY
    if ext["index"] and n == 2:
        return GestureLabel.TWO
    if ext["index"] and n == 3:
        return GestureLabel.THREE
    if ext["index"] and n == 4:
        return GestureLabel.FOUR
    return GestureLabel.UNKNOWN


@dataclass(frozen=True)
class PressEvent:
    timestamp: float
    button: str
    kind: PressKind


@dataclass(frozen=True)
class PressDetectorState:
    """Debounce and press bookkeeping; Unknown never becomes stable."""

    stable_gesture: GestureLabel | None = None
    candidate_gesture: GestureLabel | None = None
    candidate_count: int = 0
    armed_button: str | None = None
    active_button: str | None = None

    @staticmethod
    def initial() -> "PressDetectorState":
        return PressDetectorState()


def update_press_detector(
    state: PressDetectorState,
    h: HandFrame,
    layout: GuiLayout,
    cam_to_gui: Homography,
    *,
    ext_ratio: float = DEFAULT_EXT_RATIO,
    debounce_n: int = DEFAULT_DEBOUNCE_N,
) -> tuple:
    """Advance the detector by one frame; returns (state, events).

    The stable gesture changes only after debounce_n consecutive frames
    of the same label. Activation requires a stable Palm-to-One
    transition with the mapped fingertip inside a button; re-activation
    requires returning to stable Palm first. The fingertip position
    itself is not debounced.
    """
    raw = classify_gesture(h, ext_ratio)
    stable = state.stable_gesture
    cand = state.candidate_gesture
    cnt = state.candidate_count
    prev_stable = stable
    transitioned = False

    if raw is GestureLabel.UNKNOWN or raw is stable:
        cand, cnt = None, 0
    else:
        if raw is cand:
            cnt = min(cnt + 1, debounce_n)
        else:
            cand, cnt = raw, 1
        if cnt >= debounce_n:
            stable, cand, cnt = raw, None, 0
            transitioned = True

    tip = h.landmarks[INDEX_TIP, :2]
    try:
        gui_pt = apply_homography(cam_to_gui, tip)
        hit = hit_test(layout, gui_pt)
    except Exception:
        hit = None

    events = []
    active = state.active_button
    if active is not None and (stable is not GestureLabel.ONE or hit != active):
        events.append(PressEvent(h.timestamp, active, PressKind.RELEASED))
        active = None
    if (
        transitioned
        and stable is GestureLabel.ONE
        and prev_stable is GestureLabel.PALM
        and active is None
        and hit is not None
    ):
        active = hit
        events.append(PressEvent(h.timestamp, active, PressKind.ACTIVATED))

    armed = hit if stable is GestureLabel.PALM else None
    new_state = replace(
        state,
        stable_gesture=stable,
        candidate_gesture=cand,
        candidate_count=cnt,
        armed_button=armed,
        active_button=active,
    )
    return new_state, events


# canonical finger directions (unit-ish vectors, image y pointing down,
# hand pointing "up" the image) used to synthesize template frames
_FINGER_DIR = {
    "thumb": (-0.91, -0.42),
    "index": (-0.26, -0.97),
    "middle": (0.0, -1.0),
    "ring": (0.26, -0.97),
    "pinky": (0.91, -0.42),
}
_EXTENDED_SETS = {
    GestureLabel.PALM: {"thumb", "index", "middle", "ring", "pinky"},
    GestureLabel.ONE: {"index"},
    GestureLabel.TWO: {"index", "middle"},
    GestureLabel.THREE: {"index", "middle", "ring"},
    GestureLabel.FOUR: {"index", "middle", "ring", "pinky"},
    GestureLabel.FIST: set(),
    GestureLabel.THUMB: {"thumb"},
    GestureLabel.PINKY: {"pinky"},
}
_TIP_EXTENDED = 2.2  # tip radius multiple of the MCP radius when extended
_TIP_CURLED = 1.1


def canonical_frame(
    label: GestureLabel,
    fingertip,
    timestamp: float,
    scale: float = 0.04,
) -> HandFrame:
    """Synthetic frame that classifies as `label`, positioned so the
    index fingertip lands on `fingertip` (normalized image coords).

    Used by replay drivers and the operator console, which send a
    pointer position plus a gesture toggle rather than real landmarks.
    """
    if label not in _EXTENDED_SETS:
        raise ValueError(f"no canonical template for {label}")
    extended = _EXTENDED_SETS[label]
    pts = np.zeros((21, 2))
    for f in FINGERS:
        d = np.array(_FINGER_DIR[f])
        d = d / np.linalg.norm(d)
        mcp_r = 1.0
        tip_r = _TIP_EXTENDED if f in extended else _TIP_CURLED
        mcp = mcp_r * d
        tip = tip_r * d
        base_idx = MCP_INDEX[f]
        if f == "thumb":
            pts[1] = 0.5 * d  # carpal joint
            pts[2] = mcp
            pts[3] = mcp + 0.6 * (tip - mcp)
            pts[4] = tip
        else:
            pts[base_idx] = mcp
            pts[base_idx + 1] = mcp + 0.4 * (tip - mcp)
            pts[base_idx + 2] = mcp + 0.7 * (tip - mcp)
            pts[base_idx + 3] = tip
    pts *= scale
    pts = pts + (np.asarray(fingertip, dtype=float) - pts[INDEX_TIP])
    # keep the whole template inside the unit square by shifting it,
    # not clipping, so the distance ratios (and the label) survive;
    # the fingertip drifts from the request only inside the edge margin
    for ax in range(2):
        lo, hi = pts[:, ax].min(), pts[:, ax].max()
        if hi - lo > 1.0:
            raise ValueError(f"template scale {scale} exceeds the image")
        if lo < 0.0:
            pts[:, ax] -= lo
        elif hi > 1.0:
            pts[:, ax] -= hi - 1.0
    lm = np.concatenate([pts, np.zeros((21, 1))], axis=1)
    return HandFrame(timestamp, lm)
