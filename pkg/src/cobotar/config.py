"""Session configuration: one JSON document covering speeds, latencies,
geometry sources, the task definition, and sampling."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace

from .kinematics import DHChain, projection_target_chain, ur3_chain
from .projection import CameraIntrinsics, GuiLayout, default_layout

MODES = ("cobotar", "gamepad", "pendant")


class ConfigError(Exception):
    pass


DEFAULT_LATENCY_S = {"gamepad": 0.0, "cobotar": 0.1, "pendant": 0.3}
DEFAULT_CAMERA = {
    "fx": 1000.0,
    "fy": 1000.0,
    "cx": 640.0,
    "cy": 360.0,
    "width": 1280,
    "height": 720,
}


@dataclass(frozen=True)
class SessionConfig:
    mode: str = "cobotar"
    speed_mm_s: float = 25.0
    vmax_mm_s: float = 25.0
    deadzone: float = 0.1
    latency_s: dict = field(default_factory=lambda: dict(DEFAULT_LATENCY_S))
    switch_latency_s: float = 0.5
    rate_hz: float = 50.0
    seed: int = 0
    sigma: float = 0.35
    standoff_m: float = 0.6
    workspace_mm: tuple = (400.0, 400.0)
    task_center_mm: tuple | None = None  # None: centered on the home TCP
    task_side_mm: float = 150.0
    ur3_chain_file: str | None = None
    projection_chain_file: str | None = None
    layout_file: str | None = None
    camera: dict = field(default_factory=lambda: dict(DEFAULT_CAMERA))
    debounce_n: int = 3
    ext_ratio: float = 1.6
    max_faults: int = 100
    serve_out: str = "session-{n}.jsonl"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 10.0 <= self.rate_hz <= 240.0:
            raise ConfigError(f"rate_hz must lie in [10, 240], got {self.rate_hz}")
        if self.speed_mm_s <= 0 or self.vmax_mm_s <= 0:
            raise ConfigError("speeds must be positive")
        if not 0.0 <= self.deadzone < 1.0:
            raise ConfigError(f"deadzone must lie in [0, 1), got {self.deadzone}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be non-negative, got {self.sigma}")
        if self.standoff_m <= 0:
            raise ConfigError(f"standoff_m must be positive, got {self.standoff_m}")
        if self.switch_latency_s < 0:
            raise ConfigError("switch_latency_s must be non-negative")
        if self.task_side_mm <= 0:
            raise ConfigError("task_side_mm must be positive")
        if len(self.workspace_mm) != 2 or min(self.workspace_mm) <= 0:
            raise ConfigError("workspace_mm must be two positive extents")
        if self.debounce_n < 1:
            raise ConfigError("debounce_n must be at least 1")
        if self.max_faults < 0:
            raise ConfigError("max_faults must be non-negative")
        unknown = set(self.latency_s) - set(MODES)
        if unknown:
            raise ConfigError(f"latency_s has unknown modes {sorted(unknown)}")
        if any(v < 0 for v in self.latency_s.values()):
            raise ConfigError("latencies must be non-negative")
        lat = dict(DEFAULT_LATENCY_S)
        lat.update(self.latency_s)
        object.__setattr__(self, "latency_s", lat)
        object.__setattr__(self, "workspace_mm", tuple(float(v) for v in self.workspace_mm))
        if self.task_center_mm is not None:
            object.__setattr__(
                self, "task_center_mm", tuple(float(v) for v in self.task_center_mm)
            )
        for name in ("ur3_chain_file", "projection_chain_file", "layout_file"):
            path = getattr(self, name)
            if path is not None and not os.path.isfile(path):
                raise ConfigError(f"{name} does not exist: {path}")

    # resolved geometry -------------------------------------------------

    def ur3(self) -> DHChain:
        if self.ur3_chain_file is None:
            return ur3_chain()
        chain = DHChain.from_json_file(self.ur3_chain_file)
        if len(chain) != 6:
            raise ConfigError(f"ur3_chain_file must have 6 rows, got {len(chain)}")
        return chain

    def projection_chain(self) -> DHChain:
        if self.projection_chain_file is None:
            return projection_target_chain()
        return DHChain.from_json_file(self.projection_chain_file)

    def layout(self) -> GuiLayout:
        if self.layout_file is None:
            return default_layout()
        return GuiLayout.from_json_file(self.layout_file)

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.from_dict(self.camera)

    def with_mode(self, mode: str) -> "SessionConfig":
        return replace(self, mode=mode)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


def load_config(path) -> SessionConfig:
    """Parse a config file; any problem raises ConfigError naming it."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: line {e.lineno}: {e.msg}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return config_from_dict(doc, origin=str(path))


def config_from_dict(doc: dict, origin: str = "<dict>") -> SessionConfig:
    known = {f.name for f in fields(SessionConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"config {origin} has unknown keys {sorted(unknown)}")
    kwargs = dict(doc)
    for tuple_key in ("workspace_mm", "task_center_mm"):
        if kwargs.get(tuple_key) is not None:
            kwargs[tuple_key] = tuple(kwargs[tuple_key])
    try:
        return SessionConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config {origin}: {e}")
