"""Live session server: one operator connection steering one simulated
world over the JSON frame protocol.

The simulation loop ticks at the configured rate and streams state
snapshots; inbound frames feed the command pipeline between ticks. The
session log persists when the client ends the task.
"""

from __future__ import annotations

import asyncio
import logging
from collections import deque

import websockets

from .config import SessionConfig
from .gesture import GestureLabel, HandFrame, canonical_frame
from .protocol import FrameSender, ProtocolError, decode_frame, state_fields
from .simcore import (
    FaultOverflow,
    IllegalCommandForMode,
    PendantHeld,
    Simulation,
    Stick,
)

log = logging.getLogger("cobotar.server")

TRACE_TAIL = 200


class SessionServer:
    """Accepts one operator at a time; extra connections are turned away."""

    def __init__(self, cfg: SessionConfig, host: str = "127.0.0.1", port: int = 0):
        self.cfg = cfg
        self.host = host
        self.port = port
        self._server = None
        self._busy = False
        self._task_counter = 0
        self.saved_logs = []

    async def start(self) -> int:
        self._server = await websockets.serve(self._handle, self.host, self.port)
        self.port = next(iter(self._server.sockets)).getsockname()[1]
        log.info("listening on %s:%d", self.host, self.port)
        return self.port

    async def stop(self) -> None:
        self._server.close()
        await self._server.wait_closed()

    async def serve_forever(self) -> None:
        await self.start()
        await self._server.wait_closed()

    # ------------------------------------------------------------------

    async def _handle(self, ws) -> None:
        if self._busy:
            sender = FrameSender()
            try:
                await ws.send(
                    sender.encode("error", message="busy: one session at a time")
                )
            finally:
                await ws.close()
            return
        self._busy = True
        try:
            await _OperatorSession(self, ws).run()
        finally:
            self._busy = False

    def _persist(self, sim: Simulation) -> str:
        self._task_counter += 1
        path = self.cfg.serve_out.format(n=self._task_counter)
        sim.log.write(path)
        self.saved_logs.append(path)
        log.info("session log written to %s", path)
        return path


class _OperatorSession:
    def __init__(self, server: SessionServer, ws):
        self.server = server
        self.ws = ws
        self.sender = FrameSender()
        self.sim = Simulation(server.cfg, meta={"agent": "live"})
        self.trace = deque(maxlen=TRACE_TAIL)
        self.last_client_seq = None
        self.task_active = False
        self.closing = False

    async def run(self) -> None:
        await self.ws.send(self.sender.encode("hello", session=self._hello()))
        reader = asyncio.create_task(self._read())
        ticker = asyncio.create_task(self._tick_loop())
        done, pending = await asyncio.wait(
            {reader, ticker}, return_when=asyncio.FIRST_COMPLETED
        )
        self.closing = True
        for t in pending:
            t.cancel()
        for t in pending:
            try:
                await t
            except (asyncio.CancelledError, Exception):
                pass
        for t in done:
            exc = t.exception()
            if exc is not None and not isinstance(
                exc, websockets.exceptions.ConnectionClosed
            ):
                log.warning("session ended: %s", exc)

    def _hello(self) -> dict:
        sim = self.sim
        return {
            "mode": sim.world.mode,
            "rate_hz": sim.cfg.rate_hz,
            "speed_mm_s": sim.cfg.speed_mm_s,
            "vmax_mm_s": sim.cfg.vmax_mm_s,
            "standoff_m": sim.cfg.standoff_m,
            "task": {
                "center_mm": list(sim.task.center_mm),
                "side_mm": sim.task.side_mm,
            },
            "workspace_mm": list(sim.cfg.workspace_mm),
            "layout": sim.params.layout.to_dict(),
        }

    async def _fail(self, message: str) -> None:
        self.closing = True
        try:
            await self.ws.send(self.sender.encode("error", message=message))
        except websockets.exceptions.ConnectionClosed:
            pass
        await self.ws.close()

    async def _read(self) -> None:
        async for text in self.ws:
            try:
                frame = decode_frame(
                    text, role="client", last_seq=self.last_client_seq
                )
                self.last_client_seq = frame["seq"]
                await self._apply(frame)
            except ProtocolError as e:
                await self._fail(str(e))
                return

    async def _apply(self, frame: dict) -> None:
        tag = frame["type"]
        sim = self.sim
        try:
            if tag == "hand_update":
                self._apply_hand(frame)
            elif tag == "stick":
                sim.submit(Stick(frame["x"], frame["y"]))
            elif tag == "pendant":
                if frame["pressed"]:
                    sim.submit(PendantHeld(frame["action"]))
                else:
                    sim.submit(None)
            elif tag == "set_mode":
                await self._set_mode(frame["mode"])
            elif tag == "task":
                await self._task_marker(frame["event"])
        except (IllegalCommandForMode, ValueError) as e:
            raise ProtocolError(str(e))

    def _apply_hand(self, frame: dict) -> None:
        if frame.get("lm") is not None:
            hand = HandFrame.from_dict({"t": frame["t"], "lm": frame["lm"]})
        else:
            hand = canonical_frame(
                GestureLabel(frame["gesture"]), frame["fingertip"], frame["t"]
            )
        self.sim.submit_hand(hand)

    async def _set_mode(self, mode: str) -> None:
        # a fresh world (and log) per mode; switching abandons any task
        self.sim = Simulation(
            self.server.cfg.with_mode(mode), meta={"agent": "live"}
        )
        self.trace.clear()
        self.task_active = False
        await self.ws.send(self.sender.encode("hello", session=self._hello()))

    async def _task_marker(self, event: str) -> None:
        if event == "start":
            if self.task_active:
                raise ProtocolError("task already started")
            self.sim.mark_task("task_start")
            self.task_active = True
        else:
            if not self.task_active:
                raise ProtocolError("no task in progress")
            self.sim.mark_task("task_end")
            self.task_active = False
            path = self.server._persist(self.sim)
            # next task gets a fresh world and log in the same mode
            self.sim = Simulation(
                self.server.cfg.with_mode(self.sim.world.mode),
                meta={"agent": "live"},
            )
            self.trace.clear()
            log.info("task ended, log at %s", path)

    async def _tick_loop(self) -> None:
        loop = asyncio.get_running_loop()
        next_t = loop.time()
        while not self.closing:
            sim = self.sim
            faults_before = sim.fault_count
            try:
                presses = sim.tick()
            except FaultOverflow as e:
                await self._fail(f"fault overflow: {e}")
                return
            except IllegalCommandForMode as e:
                # direct commands are validated when they take effect, one
                # latency interval after submission
                await self._fail(str(e))
                return
            tcp = sim.world.ur3_tcp.translation
            self.trace.append((tcp[0] * 1000.0, tcp[1] * 1000.0))
            try:
                await self.ws.send(
                    self.sender.encode(
                        "state",
                        **state_fields(
                            sim.world,
                            sim.gui_world(),
                            sim.params.layout,
                            sim.cam_to_gui().inverse(),
                            self.trace,
                        ),
                    )
                )
                for ev in presses:
                    await self.ws.send(
                        self.sender.encode(
                            "press_event",
                            t=ev.timestamp,
                            button=ev.button,
                            kind=ev.kind.value,
                        )
                    )
                if sim.fault_count > faults_before:
                    await self.ws.send(
                        self.sender.encode(
                            "fault", t=sim.world.t, reason="ik_not_converged"
                        )
                    )
            except websockets.exceptions.ConnectionClosed:
                return
            next_t += sim.dt
            delay = next_t - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                next_t = loop.time()  # fell behind; do not burst
                await asyncio.sleep(0)  # still yield so reads make progress


async def _serve_until_interrupt(cfg: SessionConfig, port: int, host: str) -> None:
    server = SessionServer(cfg, host=host, port=port)
    await server.serve_forever()


def run_server(cfg: SessionConfig, port: int, host: str = "127.0.0.1") -> int:
    """Blocking entry point for the CLI; returns an exit code."""
    try:
        asyncio.run(_serve_until_interrupt(cfg, port, host))
    except KeyboardInterrupt:
        log.info("interrupted")
    except OSError as e:
        print(f"cannot listen on {host}:{port}: {e}")
        return 1
    return 0
