"""Fixed-step world simulation.

Each step interprets the active interface command into a planar TCP
velocity, integrates the commanded XY point (clamped to the workspace
box), tracks it with IK seeded at the previous joint vector, and
recomputes the projection-target and camera-carrier poses. Gesture
input advances the press detector before motion is applied.

Commanded direct inputs pass through a per-mode onset latency: any
change of command leaves the robot holding until the latency elapses,
then the new command engages. Hand-frame input bypasses this pipeline
because its latency arises in the detector's debounce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import MODES, SessionConfig
from .gesture import HandFrame, PressDetectorState, update_press_detector
from .kinematics import (
    DHChain,
    IkOptions,
    NotConverged,
    RigidTransform,
    fk_end,
    follower_pose,
    inverse_kinematics,
    projection_target_pose,
)
from .projection import ACTIONS, GuiLayout, cam_to_gui_homography, gui_world_pose
from . import sessionlog

HOME_Q = np.array(
    [0.0, -math.pi / 2, math.pi / 2, -math.pi / 2, -math.pi / 2, 0.0]
)

AXIS_VECTORS = {
    "+x": np.array([1.0, 0.0]),
    "-x": np.array([-1.0, 0.0]),
    "+y": np.array([0.0, 1.0]),
    "-y": np.array([0.0, -1.0]),
}


class SimError(Exception):
    pass


class IllegalCommandForMode(SimError):
    pass


class IkFailure(SimError):
    """A step's IK tracking did not converge; the step was rejected."""

    def __init__(self, msg, pos_err=None, rot_err=None):
        super().__init__(msg)
        self.pos_err = pos_err
        self.rot_err = rot_err


class FaultOverflow(SimError):
    """More rejected steps than the configured budget."""


@dataclass(frozen=True)
class ButtonHeld:
    button: str


@dataclass(frozen=True)
class Stick:
    x: float
    y: float

    def __post_init__(self):
        if not (-1.0 <= self.x <= 1.0 and -1.0 <= self.y <= 1.0):
            raise ValueError(f"stick axes must lie in [-1,1], got ({self.x}, {self.y})")


@dataclass(frozen=True)
class PendantHeld:
    action: str

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValueError(f"unknown pendant action {self.action!r}")


@dataclass(frozen=True)
class SquareTask:
    center_mm: tuple
    side_mm: float = 150.0

    def __post_init__(self):
        if self.side_mm <= 0:
            raise ValueError(f"side must be positive, got {self.side_mm}")
        object.__setattr__(
            self, "center_mm", (float(self.center_mm[0]), float(self.center_mm[1]))
        )

    def corners_mm(self) -> np.ndarray:
        """Corners in traversal order: top-left, top-right, bottom-right,
        bottom-left (+y is up)."""
        cx, cy = self.center_mm
        h = self.side_mm / 2.0
        return np.array(
            [[cx - h, cy + h], [cx + h, cy + h], [cx + h, cy - h], [cx - h, cy - h]]
        )

    def segments_mm(self) -> list:
        c = self.corners_mm()
        return [(c[i], c[(i + 1) % 4]) for i in range(4)]


@dataclass(frozen=True)
class WorldState:
    t: float
    ur3_q: np.ndarray
    ur3_tcp: RigidTransform
    target: RigidTransform
    follower: RigidTransform
    commanded_xy: np.ndarray  # meters; what the interface has asked for
    detector: PressDetectorState
    mode: str


@dataclass(frozen=True)
class SimParams:
    """Resolved, immutable inputs of the per-step transition."""

    chain: DHChain
    proj_chain: DHChain
    layout: GuiLayout
    intrinsics: object
    speed_mm_s: float
    vmax_mm_s: float
    deadzone: float
    standoff_m: float
    tcp_rotation: np.ndarray  # frozen at the initial pose
    tcp_z: float
    box_lo: np.ndarray  # meters
    box_hi: np.ndarray
    ik_opts: IkOptions
    debounce_n: int
    ext_ratio: float


def interpret_command(mode: str, cmd, cfg) -> np.ndarray:
    """Planar TCP velocity (vx, vy) in mm/s for a command under a mode.

    Button modes give axis-aligned motion at cfg.speed_mm_s along the
    held action; the stick scales cfg.vmax_mm_s per axis after a radial
    deadzone, so diagonals are allowed.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if cmd is None:
        return np.zeros(2)
    if isinstance(cmd, ButtonHeld):
        if mode != "cobotar":
            raise IllegalCommandForMode(f"button commands are not legal in {mode}")
        action = cfg.layout.action_of(cmd.button)
        return cfg.speed_mm_s * AXIS_VECTORS[action]
    if isinstance(cmd, PendantHeld):
        if mode != "pendant":
            raise IllegalCommandForMode(f"pendant commands are not legal in {mode}")
        return cfg.speed_mm_s * AXIS_VECTORS[cmd.action]
    if isinstance(cmd, Stick):
        if mode != "gamepad":
            raise IllegalCommandForMode(f"stick commands are not legal in {mode}")
        if math.hypot(cmd.x, cmd.y) <= cfg.deadzone:
            return np.zeros(2)
        return cfg.vmax_mm_s * np.array([cmd.x, cmd.y])
    raise IllegalCommandForMode(f"unsupported command {cmd!r}")


def step(world: WorldState, cmd, dt: float, params: SimParams, hand=None):
    """One fixed step; returns (new_world, press_events).

    Raises IkFailure when joint tracking fails; callers reject the step
    (pose held) and record a fault.
    """
    if not 0.0 < dt <= 0.1:
        raise ValueError(f"dt must lie in (0, 0.1], got {dt}")

    detector = world.detector
    presses = []
    if hand is not None:
        if world.mode != "cobotar":
            raise IllegalCommandForMode(f"hand frames are not legal in {world.mode}")
        cam_to_gui = cam_to_gui_homography(
            params.intrinsics, world.follower, world.target, params.layout
        )
        detector, presses = update_press_detector(
            detector,
            hand,
            params.layout,
            cam_to_gui,
            ext_ratio=params.ext_ratio,
            debounce_n=params.debounce_n,
        )
        active = detector.active_button
        cmd = ButtonHeld(active) if active is not None else None

    v = interpret_command(world.mode, cmd, params)
    new_cxy = np.clip(
        world.commanded_xy + v * (dt / 1000.0), params.box_lo, params.box_hi
    )

    if np.array_equal(new_cxy, world.commanded_xy):
        q, tcp = world.ur3_q, world.ur3_tcp
    else:
        goal = RigidTransform(
            params.tcp_rotation, np.array([new_cxy[0], new_cxy[1], params.tcp_z])
        )
        try:
            q = inverse_kinematics(params.chain, goal, world.ur3_q, params.ik_opts)
        except NotConverged as e:
            raise IkFailure(str(e), pos_err=e.pos_err, rot_err=e.rot_err)
        tcp = fk_end(params.chain, q)

    target = projection_target_pose(q, params.proj_chain)
    follower = follower_pose(target, params.standoff_m)
    new_world = WorldState(
        t=world.t + dt,
        ur3_q=q,
        ur3_tcp=tcp,
        target=target,
        follower=follower,
        commanded_xy=new_cxy,
        detector=detector,
        mode=world.mode,
    )
    return new_world, presses


def command_to_json(cmd) -> dict:
    if cmd is None:
        return {"type": "none"}
    if isinstance(cmd, ButtonHeld):
        return {"type": "button", "id": cmd.button}
    if isinstance(cmd, Stick):
        return {"type": "stick", "x": cmd.x, "y": cmd.y}
    if isinstance(cmd, PendantHeld):
        return {"type": "pendant", "action": cmd.action}
    raise ValueError(f"unsupported command {cmd!r}")


_UNSET = object()


class Simulation:
    """Owns one world, its command pipeline, and the session log."""

    def __init__(
        self,
        cfg: SessionConfig,
        *,
        task: SquareTask | None = None,
        latency_override: float | None = None,
        meta: dict | None = None,
    ):
        self.cfg = cfg
        chain = cfg.ur3()
        proj_chain = cfg.projection_chain()
        layout = cfg.layout()
        self.dt = 1.0 / cfg.rate_hz

        q0 = HOME_Q.copy()
        tcp0 = fk_end(chain, q0)
        if task is not None:
            self.task = task
        else:
            if cfg.task_center_mm is not None:
                center = cfg.task_center_mm
            else:
                # put the square's top-left corner on the home TCP so every
                # task point stays well inside the reachable annulus
                center = (
                    tcp0.translation[0] * 1000.0 + cfg.task_side_mm / 2.0,
                    tcp0.translation[1] * 1000.0 - cfg.task_side_mm / 2.0,
                )
            self.task = SquareTask(center, cfg.task_side_mm)
        half = np.array(cfg.workspace_mm) / 2000.0
        center_m = np.array(self.task.center_mm) / 1000.0
        self.params = SimParams(
            chain=chain,
            proj_chain=proj_chain,
            layout=layout,
            intrinsics=cfg.intrinsics(),
            speed_mm_s=cfg.speed_mm_s,
            vmax_mm_s=cfg.vmax_mm_s,
            deadzone=cfg.deadzone,
            standoff_m=cfg.standoff_m,
            tcp_rotation=tcp0.rotation,
            tcp_z=tcp0.translation[2],
            box_lo=center_m - half,
            box_hi=center_m + half,
            ik_opts=IkOptions(),
            debounce_n=cfg.debounce_n,
            ext_ratio=cfg.ext_ratio,
        )
        target0 = projection_target_pose(q0, proj_chain)
        self.world = WorldState(
            t=0.0,
            ur3_q=q0,
            ur3_tcp=tcp0,
            target=target0,
            follower=follower_pose(target0, cfg.standoff_m),
            commanded_xy=tcp0.translation[:2].copy(),
            detector=PressDetectorState.initial(),
            mode=cfg.mode,
        )
        self.latency = (
            cfg.latency_s[cfg.mode] if latency_override is None else latency_override
        )
        self.fault_count = 0
        self.log = sessionlog.SessionLog()
        session = {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "rate_hz": cfg.rate_hz,
            "speed_mm_s": cfg.speed_mm_s,
            "task": {
                "center_mm": list(self.task.center_mm),
                "side_mm": self.task.side_mm,
            },
        }
        if meta:
            session.update(meta)
        self.log.append(sessionlog.input_record(0.0, "session", **session))
        self._log_sample()

        self._last_submitted = _UNSET
        self._current = None
        self._pending = None  # (command, effective_time)
        self._hand = None
        self._logged_cmd = None

    # input ----------------------------------------------------------------

    def submit(self, cmd) -> None:
        """Offer a direct command; a change stalls for the mode latency."""
        if cmd == self._last_submitted:
            return
        self._last_submitted = cmd
        if self.latency <= 0.0:
            self._current, self._pending = cmd, None
        else:
            self._pending = (cmd, self.world.t + self.latency)

    def submit_hand(self, frame: HandFrame) -> None:
        if self.world.mode != "cobotar":
            raise IllegalCommandForMode(
                f"hand frames are not legal in {self.world.mode}"
            )
        self._hand = frame

    def _effective_command(self):
        if self._pending is not None:
            cmd, t_eff = self._pending
            if self.world.t >= t_eff:
                self._current, self._pending = cmd, None
            else:
                return None  # holding while the new command lands
        return self._current

    # stepping ---------------------------------------------------------------

    def tick(self) -> list:
        """Advance one step; returns the press events of the step."""
        hand, self._hand = self._hand, None
        cmd = self._effective_command()
        presses = []
        try:
            new_world, presses = step(self.world, cmd, self.dt, self.params, hand=hand)
            self.world = new_world
            if hand is not None:
                active = new_world.detector.active_button
                cmd = ButtonHeld(active) if active is not None else None
        except IkFailure as e:
            self.fault_count += 1
            self.log.append(
                sessionlog.fault_record(
                    self.world.t + self.dt,
                    "ik_not_converged",
                    pos_err=e.pos_err,
                    rot_err=e.rot_err,
                )
            )
            self.world = replace(self.world, t=self.world.t + self.dt)
            if self.fault_count > self.cfg.max_faults:
                raise FaultOverflow(
                    f"{self.fault_count} rejected steps exceeds the budget "
                    f"of {self.cfg.max_faults}"
                )
            cmd = None  # the robot held this step
        if cmd != self._logged_cmd:
            self.log.append(
                sessionlog.input_record(
                    self.world.t, "command", command=command_to_json(cmd)
                )
            )
            self._logged_cmd = cmd
        for ev in presses:
            self.log.append(
                sessionlog.press_record(ev.timestamp, ev.button, ev.kind.value)
            )
        self._log_sample()
        return presses

    def _log_sample(self) -> None:
        w = self.world
        self.log.append(
            sessionlog.sample_record(
                w.t, w.ur3_q, w.ur3_tcp.translation, w.mode
            )
        )

    def mark_task(self, event: str) -> None:
        if event not in ("task_start", "task_end"):
            raise ValueError(f"unknown task marker {event!r}")
        self.log.append(sessionlog.input_record(self.world.t, event))

    # views -------------------------------------------------------------------

    def gui_world(self) -> dict:
        return gui_world_pose(self.world.target, self.params.layout)

    def cam_to_gui(self):
        return cam_to_gui_homography(
            self.params.intrinsics,
            self.world.follower,
            self.world.target,
            self.params.layout,
        )
