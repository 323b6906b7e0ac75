"""Scripted operators for the square-drawing task.

The perfect agent is an idealized open-loop bound: it replays the exact
command schedule (hold each side for side/speed, pause switch_latency
at the three interior corners) with the interface latency zeroed, so
its completion time is the analytic schedule length.

The noisy agent is a closed-loop stand-in for a human: it steers toward
the next corner with zero-mean Gaussian heading error (resampled every
0.2 s), pays the per-mode command-onset latency on every command
change, and in the button modes can press a wrong direction button
whenever the heading error exceeds 45 degrees. The gamepad variant
redirects continuously and never pauses at corners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SessionConfig
from .sessionlog import SessionLog, fault_record
from .simcore import (
    AXIS_VECTORS,
    ButtonHeld,
    PendantHeld,
    Simulation,
    SquareTask,
    Stick,
)

# traversal actions for the corner order TL -> TR -> BR -> BL -> TL
SIDE_ACTIONS = ("+x", "-y", "-x", "+y")

WAYPOINT_TOL_MM = 2.0
HEADING_RESAMPLE_S = 0.2


@dataclass(frozen=True)
class AgentSpec:
    kind: str
    seed: int = 0
    sigma: float = 0.35

    def __post_init__(self):
        if self.kind not in ("perfect", "noisy"):
            raise ValueError(f"agent kind must be perfect or noisy, got {self.kind!r}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")


def parse_agent_spec(text: str, default_sigma: float = 0.35) -> AgentSpec:
    """Parse 'perfect' or 'noisy:SEED[:SIGMA]'."""
    parts = text.split(":")
    if parts[0] == "perfect" and len(parts) == 1:
        return AgentSpec("perfect")
    if parts[0] == "noisy" and len(parts) in (2, 3):
        try:
            seed = int(parts[1])
            sigma = float(parts[2]) if len(parts) == 3 else default_sigma
        except ValueError:
            raise ValueError(f"bad agent spec {text!r}")
        return AgentSpec("noisy", seed=seed, sigma=sigma)
    raise ValueError(
        f"bad agent spec {text!r}; expected perfect or noisy:SEED[:SIGMA]"
    )


def _axis_command(mode: str, action: str, layout):
    if mode == "cobotar":
        return ButtonHeld(layout.button_for(action).id)
    if mode == "pendant":
        return PendantHeld(action)
    v = AXIS_VECTORS[action]
    return Stick(float(v[0]), float(v[1]))


def run_scripted_agent(
    spec: AgentSpec, task: SquareTask | None, cfg: SessionConfig
) -> SessionLog:
    """Run one complete task under the agent; returns the session log."""
    if spec.kind == "perfect":
        return _run_perfect(task, cfg)
    return _run_noisy(spec, task, cfg)


def _run_perfect(task: SquareTask | None, cfg: SessionConfig) -> SessionLog:
    sim = Simulation(cfg, task=task, latency_override=0.0, meta={"agent": "perfect"})
    task = sim.task
    speed = cfg.vmax_mm_s if cfg.mode == "gamepad" else cfg.speed_mm_s
    side_steps = round(task.side_mm / speed / sim.dt)
    pause_steps = round(cfg.switch_latency_s / sim.dt)
    schedule = []
    for i, action in enumerate(SIDE_ACTIONS):
        cmd = _axis_command(cfg.mode, action, sim.params.layout)
        schedule.extend([cmd] * side_steps)
        if i < len(SIDE_ACTIONS) - 1:
            schedule.extend([None] * pause_steps)
    sim.mark_task("task_start")
    for cmd in schedule:
        sim.submit(cmd)
        sim.tick()
    sim.mark_task("task_end")
    sim.submit(None)
    return sim.log


def _run_noisy(spec: AgentSpec, task: SquareTask | None, cfg: SessionConfig) -> SessionLog:
    sim = Simulation(
        cfg,
        task=task,
        meta={"agent": "noisy", "seed": spec.seed, "sigma": spec.sigma},
    )
    task = sim.task
    rng = np.random.default_rng(spec.seed)
    corners = task.corners_mm()
    waypoints = [corners[1], corners[2], corners[3], corners[0]]
    speed = cfg.vmax_mm_s if cfg.mode == "gamepad" else cfg.speed_mm_s
    ideal_s = 4.0 * task.side_mm / speed + 3.0 * cfg.switch_latency_s
    give_up_t = max(60.0, 6.0 * ideal_s)

    eps = 0.0
    next_resample = 0.0
    pause_until = -math.inf
    wp_i = 0
    completed = True

    sim.mark_task("task_start")
    while True:
        t = sim.world.t
        if t > give_up_t:
            completed = False
            sim.log.append(fault_record(t, "agent_timeout", waypoint=wp_i))
            break
        while t >= next_resample:
            eps = float(rng.normal(0.0, spec.sigma))
            next_resample += HEADING_RESAMPLE_S

        pos = sim.world.ur3_tcp.translation[:2] * 1000.0
        d = waypoints[wp_i] - pos
        if math.hypot(d[0], d[1]) <= WAYPOINT_TOL_MM:
            wp_i += 1
            if wp_i == len(waypoints):
                break
            if cfg.mode != "gamepad" and cfg.switch_latency_s > 0:
                pause_until = t + cfg.switch_latency_s
            d = waypoints[wp_i] - pos

        if t < pause_until:
            cmd = None
        else:
            theta = math.atan2(d[1], d[0]) + eps
            c, s = math.cos(theta), math.sin(theta)
            if cfg.mode == "gamepad":
                m = max(abs(c), abs(s))
                cmd = Stick(c / m, s / m)
            else:
                if abs(c) >= abs(s):
                    action = "+x" if c > 0 else "-x"
                else:
                    action = "+y" if s > 0 else "-y"
                cmd = _axis_command(cfg.mode, action, sim.params.layout)
        sim.submit(cmd)
        sim.tick()

    sim.mark_task("task_end")
    sim.submit(None)
    if not completed:
        sim.log.append(
            fault_record(sim.world.t, "task_incomplete", waypoint=wp_i)
        )
    return sim.log
