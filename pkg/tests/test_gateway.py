"""Frame protocol, live server, replay, and CLI tests.

Server scenarios run a real websocket server on an ephemeral port inside
``asyncio.run``. Every frame a scenario receives goes through
``decode_frame(role="server")`` with sequence tracking, so each scenario
doubles as a conformance check on the server's outbound stream.
"""

import asyncio
import json

import numpy as np
import pytest
import websockets

from cobotar import cli
from cobotar.config import SessionConfig
from cobotar.metrics import session_metrics
from cobotar.projection import apply_homography, Homography
from cobotar.protocol import (
    CLIENT_TYPES,
    SERVER_TYPES,
    FrameSender,
    ProtocolError,
    decode_frame,
    encode_frame,
    state_fields,
)
from cobotar.replay import frames_from_log, record_from_frame, run_replay
from cobotar.server import SessionServer
from cobotar.sessionlog import SessionLog, input_record
from cobotar.simcore import Simulation


# --- framing ----------------------------------------------------------------


def test_encode_frame_is_compact_and_ordered():
    assert (
        encode_frame(3, "stick", {"x": 0.5, "y": -1.0})
        == '{"v":1,"seq":3,"type":"stick","x":0.5,"y":-1.0}'
    )


def test_frame_sender_counts_from_one():
    s = FrameSender()
    first = json.loads(s.encode("task", event="start"))
    second = json.loads(s.encode("task", event="end"))
    assert (first["seq"], second["seq"]) == (1, 2)


def test_decode_round_trips_every_client_type():
    payloads = {
        "hand_update": {"t": 0.0, "fingertip": [0.5, 0.5], "gesture": "Palm"},
        "stick": {"x": 0.25, "y": -0.5},
        "pendant": {"action": "+x", "pressed": True},
        "set_mode": {"mode": "gamepad"},
        "task": {"event": "start"},
    }
    assert set(payloads) == set(CLIENT_TYPES)
    for i, (tag, fields) in enumerate(payloads.items()):
        frame = decode_frame(encode_frame(i + 1, tag, fields), role="client", last_seq=i)
        assert frame["type"] == tag


@pytest.mark.parametrize(
    "text,message",
    [
        ("{not json", "malformed JSON"),
        ('["v",1]', "JSON object"),
        ('{"v":2,"seq":1,"type":"stick","x":0,"y":0}', "version"),
        ('{"seq":1,"type":"stick","x":0,"y":0}', "version"),
        ('{"v":1,"seq":1,"type":"warp"}', "unknown frame type"),
        ('{"v":1,"seq":1,"type":"state"}', "unknown frame type"),  # server tag
        ('{"v":1,"seq":1.5,"type":"task","event":"start"}', "seq"),
        ('{"v":1,"seq":true,"type":"task","event":"start"}', "seq"),
    ],
)
def test_decode_rejects_malformed_frames(text, message):
    with pytest.raises(ProtocolError, match=message):
        decode_frame(text, role="client")


def test_decode_enforces_monotonic_seq():
    text = encode_frame(5, "task", {"event": "start"})
    assert decode_frame(text, role="client", last_seq=4)["seq"] == 5
    with pytest.raises(ProtocolError, match="out-of-order"):
        decode_frame(text, role="client", last_seq=5)
    with pytest.raises(ProtocolError, match="out-of-order"):
        decode_frame(text, role="client", last_seq=9)


def test_decode_direction_split():
    state = encode_frame(1, "hello", {"session": {}})
    assert decode_frame(state, role="server")["type"] == "hello"
    with pytest.raises(ProtocolError):
        decode_frame(state, role="client")
    with pytest.raises(ValueError, match="role"):
        decode_frame(state, role="operator")
    stick = encode_frame(1, "stick", {"x": 0, "y": 0})
    with pytest.raises(ProtocolError):
        decode_frame(stick, role="server")
    assert set(SERVER_TYPES) & set(CLIENT_TYPES) == set()


@pytest.mark.parametrize(
    "tag,fields",
    [
        ("hand_update", {"fingertip": [0.5, 0.5], "gesture": "Palm"}),  # missing t
        ("hand_update", {"t": 0.0, "lm": [[0.0, 0.0, 0.0]] * 20}),
        ("hand_update", {"t": 0.0, "lm": [[0.0, 0.0]] * 21}),
        ("hand_update", {"t": 0.0, "fingertip": [0.5], "gesture": "Palm"}),
        ("hand_update", {"t": 0.0, "fingertip": [0.5, 0.5]}),
        ("stick", {"x": 1.5, "y": 0.0}),
        ("stick", {"x": 0.0}),
        ("stick", {"x": "0", "y": 0.0}),
        ("pendant", {"action": "up", "pressed": True}),
        ("pendant", {"action": "+x", "pressed": 1}),
        ("set_mode", {"mode": "voice"}),
        ("task", {"event": "pause"}),
    ],
)
def test_client_payload_validation(tag, fields):
    with pytest.raises(ProtocolError):
        decode_frame(encode_frame(1, tag, fields), role="client")


def test_valid_lm_hand_update_passes():
    lm = [[0.5, 0.5, 0.0]] * 21
    frame = decode_frame(
        encode_frame(1, "hand_update", {"t": 1.0, "lm": lm}), role="client"
    )
    assert frame["lm"][20] == [0.5, 0.5, 0.0]


def test_state_fields_structure():
    sim = Simulation(SessionConfig())
    fields = state_fields(
        sim.world,
        sim.gui_world(),
        sim.params.layout,
        sim.cam_to_gui().inverse(),
        [(1.0, 2.0)],
    )
    assert fields["mode"] == "cobotar"
    assert len(fields["q"]) == 6 and len(fields["tcp"]) == 3
    assert fields["active_button"] is None
    assert fields["trace_tail"] == [[1.0, 2.0]]
    assert len(fields["gui_to_cam"]) == 9
    buttons = {b["id"]: b for b in fields["gui_buttons"]}
    assert len(buttons) == 4
    for b in buttons.values():
        assert len(b["rect_mm"]) == 4
        assert len(b["quad"]) == 4 and all(len(p) == 3 for p in b["quad"])
        assert b["active"] is False
    # the published homography takes gui mm to normalized camera coords
    h = Homography(np.array(fields["gui_to_cam"]).reshape(3, 3))
    x, y, w, hh = buttons["btn+y"]["rect_mm"] if "btn+y" in buttons else (60, 80, 40, 40)
    u, v = apply_homography(h, (x + w / 2.0, y + hh / 2.0))
    assert 0.0 <= u <= 1.0 and 0.0 <= v <= 1.0


# --- replay -----------------------------------------------------------------


def _sim_log(tmp_path, mode="pendant", extra_args=()):
    path = tmp_path / f"{mode}.jsonl"
    rc = cli.main(
        [
            "simulate",
            "--mode",
            mode,
            "--out",
            str(path),
            *extra_args,
        ]
    )
    assert rc == 0
    return path


def test_frames_round_trip_through_records(tmp_path):
    path = _sim_log(tmp_path)
    log = SessionLog.read(path)
    rebuilt = SessionLog()
    for _, type_, fields in frames_from_log(log):
        rec = record_from_frame(type_, json.loads(json.dumps(fields)))
        if rec is not None:
            rebuilt.append(rec)
    # command inputs are robot-side and drop out of the stream
    assert len(rebuilt.records) < len(log.records)
    assert [r for r in rebuilt.records if r["kind"] == "input" and r.get("event") not in
            ("session", "task_start", "task_end")] == []
    assert rebuilt.samples() == log.samples()
    assert rebuilt.session_meta() == log.session_meta()
    assert rebuilt.task_window() == log.task_window()
    assert record_from_frame("error", {"message": "x"}) is None


def test_run_replay_emits_a_valid_server_stream(tmp_path):
    import io

    path = _sim_log(tmp_path)
    out = io.StringIO()
    captured = run_replay(path, 1.0, out=out, sleep=False)
    last = None
    types = []
    for line in out.getvalue().splitlines():
        frame = decode_frame(line, role="server", last_seq=last)
        last = frame["seq"]
        types.append(frame["type"])
    assert types[0] == "hello"
    assert "task_marker" in types and "state" in types
    assert session_metrics(captured) == session_metrics(SessionLog.read(path))


def test_run_replay_capture_file_and_speed_validation(tmp_path):
    import io

    path = _sim_log(tmp_path)
    cap = tmp_path / "cap.jsonl"
    captured = run_replay(path, 3.0, out=io.StringIO(), capture_path=cap, sleep=False)
    assert SessionLog.read(cap).records == captured.records
    with pytest.raises(ValueError, match="speed"):
        run_replay(path, 0.0, out=io.StringIO(), sleep=False)


# --- live server ------------------------------------------------------------


class _Client:
    """Test-side operator that validates everything the server sends."""

    def __init__(self, ws):
        self.ws = ws
        self.sender = FrameSender()
        self.last = None

    async def send(self, type_, **fields):
        await self.ws.send(self.sender.encode(type_, **fields))

    async def recv(self):
        frame = decode_frame(await self.ws.recv(), role="server", last_seq=self.last)
        self.last = frame["seq"]
        return frame

    async def recv_until(self, pred, limit=600):
        for _ in range(limit):
            frame = await self.recv()
            if pred(frame):
                return frame
        raise AssertionError("expected frame did not arrive within the limit")


def _run(tmp_path, scenario, **cfg_kw):
    cfg_kw.setdefault("serve_out", str(tmp_path / "live-{n}.jsonl"))
    cfg = SessionConfig(**cfg_kw)

    async def main():
        server = SessionServer(cfg, port=0)
        port = await server.start()
        try:
            async with websockets.connect(f"ws://127.0.0.1:{port}") as ws:
                await scenario(server, _Client(ws), port)
        finally:
            await server.stop()

    asyncio.run(asyncio.wait_for(main(), timeout=60))


def test_server_greets_with_session_parameters(tmp_path):
    async def scenario(server, client, port):
        hello = await client.recv()
        assert hello["type"] == "hello"
        s = hello["session"]
        assert s["mode"] == "cobotar"
        assert s["rate_hz"] == 50.0
        assert s["task"]["side_mm"] == 150.0
        assert {b["action"] for b in s["layout"]["buttons"]} == {"+x", "-x", "+y", "-y"}
        state = await client.recv_until(lambda f: f["type"] == "state")
        assert len(state["gui_to_cam"]) == 9
        assert state["active_button"] is None

    _run(tmp_path, scenario)


def test_server_turns_away_a_second_operator(tmp_path):
    async def scenario(server, client, port):
        await client.recv()  # hello
        async with websockets.connect(f"ws://127.0.0.1:{port}") as ws2:
            raw = await ws2.recv()
            frame = decode_frame(raw, role="server")
            assert frame["type"] == "error"
            assert "busy" in frame["message"]
            with pytest.raises(websockets.exceptions.ConnectionClosed):
                await ws2.recv()
        # the first session keeps streaming
        await client.recv_until(lambda f: f["type"] == "state")

    _run(tmp_path, scenario)


def test_stick_drives_the_arm_in_gamepad_mode(tmp_path):
    async def scenario(server, client, port):
        await client.recv()
        first = await client.recv_until(lambda f: f["type"] == "state")
        await client.send("stick", x=1.0, y=0.0)
        later = await client.recv_until(
            lambda f: f["type"] == "state" and f["t"] >= first["t"] + 0.5
        )
        moved_mm = (later["tcp"][0] - first["tcp"][0]) * 1000.0
        assert moved_mm > 5.0
        assert abs(later["tcp"][1] - first["tcp"][1]) * 1000.0 < 0.5

    _run(tmp_path, scenario, mode="gamepad")


def test_pendant_held_then_released(tmp_path):
    async def scenario(server, client, port):
        await client.recv()
        first = await client.recv_until(lambda f: f["type"] == "state")
        await client.send("pendant", action="+y", pressed=True)
        # the pendant pays 0.3 s onset latency before the arm moves
        later = await client.recv_until(
            lambda f: f["type"] == "state" and f["t"] >= first["t"] + 0.8
        )
        assert (later["tcp"][1] - first["tcp"][1]) * 1000.0 > 5.0
        await client.send("pendant", action="+y", pressed=False)
        stop = await client.recv_until(
            lambda f: f["type"] == "state" and f["t"] >= later["t"] + 0.2
        )
        after = await client.recv_until(
            lambda f: f["type"] == "state" and f["t"] >= stop["t"] + 0.2
        )
        assert abs(after["tcp"][1] - stop["tcp"][1]) * 1000.0 < 1.0

    _run(tmp_path, scenario, mode="pendant")


async def _feed_hand(client, plan, presses):
    """Send one hand frame per simulation tick.

    The simulation consumes at most one hand frame per tick, so sends
    must be paced by the state stream; press events that arrive while
    pacing are collected.
    """
    t = 0.0
    for gesture, tip, reps in plan:
        for _ in range(reps):
            await client.send("hand_update", t=t, fingertip=tip, gesture=gesture)
            t += 0.02
            for _ in range(200):
                frame = await client.recv()
                if frame["type"] == "press_event":
                    presses.append(frame)
                if frame["type"] == "state":
                    break


def test_gesture_press_via_websocket(tmp_path):
    async def scenario(server, client, port):
        await client.recv()
        state = await client.recv_until(lambda f: f["type"] == "state")
        h = Homography(np.array(state["gui_to_cam"]).reshape(3, 3))
        by_action = {b["action"]: b for b in state["gui_buttons"]}
        x, y, w, hh = by_action["+y"]["rect_mm"]
        tip = apply_homography(h, (x + w / 2.0, y + hh / 2.0))
        tip = [float(tip[0]), float(tip[1])]
        presses = []
        await _feed_hand(client, [("Palm", tip, 5), ("One", tip, 10)], presses)
        if not presses:
            presses.append(
                await client.recv_until(lambda f: f["type"] == "press_event")
            )
        assert presses[0]["kind"] == "activated"
        assert presses[0]["button"] == by_action["+y"]["id"]
        lit = await client.recv_until(
            lambda f: f["type"] == "state" and f["active_button"] is not None
        )
        active = {b["id"]: b["active"] for b in lit["gui_buttons"]}
        assert active[presses[0]["button"]] is True
        assert sum(active.values()) == 1

    _run(tmp_path, scenario)


def test_fingertip_in_the_gap_never_presses(tmp_path):
    async def scenario(server, client, port):
        await client.recv()
        state = await client.recv_until(lambda f: f["type"] == "state")
        h = Homography(np.array(state["gui_to_cam"]).reshape(3, 3))
        tip = apply_homography(h, (80.0, 60.0))  # central gap
        tip = [float(tip[0]), float(tip[1])]
        presses = []
        await _feed_hand(client, [("Palm", tip, 5), ("One", tip, 12)], presses)
        assert presses == []
        last = await client.recv_until(lambda f: f["type"] == "state")
        assert last["active_button"] is None

    _run(tmp_path, scenario)


def test_task_markers_persist_a_readable_log(tmp_path):
    async def scenario(server, client, port):
        await client.recv()
        await client.send("task", event="start")
        start = await client.recv_until(lambda f: f["type"] == "state")
        await client.send("pendant", action="+x", pressed=True)
        await client.recv_until(
            lambda f: f["type"] == "state" and f["t"] >= start["t"] + 0.5
        )
        await client.send("task", event="end")
        await client.recv_until(lambda f: f["type"] == "state" and f["t"] < 0.1)
        assert len(server.saved_logs) == 1
        saved = SessionLog.read(server.saved_logs[0])
        t0, t1 = saved.task_window()
        assert t1 > t0 >= 0.0
        assert saved.session_meta()["mode"] == "pendant"

    _run(tmp_path, scenario, mode="pendant")


def test_task_marker_misuse_is_a_protocol_error(tmp_path):
    async def scenario(server, client, port):
        await client.recv()
        await client.send("task", event="end")  # nothing started
        err = await client.recv_until(lambda f: f["type"] == "error")
        assert "no task" in err["message"]
        with pytest.raises(websockets.exceptions.ConnectionClosed):
            while True:
                await client.recv()

    _run(tmp_path, scenario)


def test_bad_client_seq_closes_the_session(tmp_path):
    async def scenario(server, client, port):
        await client.recv()
        await client.send("task", event="start")
        # replay the same sequence number again, bypassing the sender
        await client.ws.send(encode_frame(1, "task", {"event": "end"}))
        err = await client.recv_until(lambda f: f["type"] == "error")
        assert "out-of-order" in err["message"]
        with pytest.raises(websockets.exceptions.ConnectionClosed):
            while True:
                await client.recv()

    _run(tmp_path, scenario)


def test_illegal_command_for_mode_closes_the_session(tmp_path):
    async def scenario(server, client, port):
        await client.recv()
        await client.send("stick", x=0.5, y=0.0)  # stick in cobotar mode
        err = await client.recv_until(lambda f: f["type"] == "error")
        assert "stick" in err["message"]

    _run(tmp_path, scenario)


def test_set_mode_restarts_with_a_fresh_hello(tmp_path):
    async def scenario(server, client, port):
        first = await client.recv()
        assert first["session"]["mode"] == "cobotar"
        await client.send("set_mode", mode="gamepad")
        hello = await client.recv_until(lambda f: f["type"] == "hello")
        assert hello["session"]["mode"] == "gamepad"
        state = await client.recv_until(lambda f: f["type"] == "state")
        assert state["mode"] == "gamepad"
        # stick input is legal now
        await client.send("stick", x=0.0, y=-1.0)
        await client.recv_until(
            lambda f: f["type"] == "state" and f["t"] >= state["t"] + 0.3
        )

    _run(tmp_path, scenario)


# --- CLI --------------------------------------------------------------------


def _write_cfg(tmp_path, **overrides):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(overrides))
    return str(path)


def test_cli_simulate_writes_a_log_and_reports(tmp_path, capsys):
    out = tmp_path / "run.jsonl"
    cfg = _write_cfg(tmp_path, speed_mm_s=150.0, vmax_mm_s=150.0)
    rc = cli.main(
        ["simulate", "--config", cfg, "--mode", "gamepad", "--out", str(out)]
    )
    assert rc == 0
    printed = capsys.readouterr().out
    assert "gamepad perfect agent" in printed
    assert str(out) in printed
    log = SessionLog.read(out)
    assert log.session_meta()["mode"] == "gamepad"
    assert session_metrics(log)["faults"] == 0


def test_cli_simulate_rejects_bad_agent_and_config(tmp_path, capsys):
    out = str(tmp_path / "x.jsonl")
    assert cli.main(["simulate", "--agent", "psychic", "--out", out]) == 2
    assert "agent" in capsys.readouterr().err
    bad = _write_cfg(tmp_path, rate_hz=999.0)
    assert cli.main(["simulate", "--config", bad, "--out", out]) == 2
    assert "rate_hz" in capsys.readouterr().err
    missing = str(tmp_path / "nope.json")
    assert cli.main(["simulate", "--config", missing, "--out", out]) == 2


def test_cli_metrics_writes_json_csv_and_figures(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, speed_mm_s=150.0, vmax_mm_s=150.0)
    logs = []
    for mode in ("gamepad", "pendant"):
        path = tmp_path / f"{mode}.jsonl"
        assert (
            cli.main(
                [
                    "simulate",
                    "--config",
                    cfg,
                    "--mode",
                    mode,
                    "--out",
                    str(path),
                ]
            )
            == 0
        )
        logs.append(str(path))
    capsys.readouterr()

    json_path = tmp_path / "report.json"
    rc = cli.main(["metrics", "--logs", *logs, "--json", str(json_path)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "wrote" in printed

    report = json.loads(json_path.read_text())
    assert len(report["sessions"]) == 2
    assert report["errors"] == []
    csv_path = tmp_path / "report.csv"
    assert csv_path.read_text().startswith("participant,interface,time_s")
    figdir = tmp_path / "report-figures"
    pngs = sorted(p.name for p in figdir.iterdir())
    assert pngs and all(name.endswith(".png") for name in pngs)


def test_cli_metrics_no_figures_and_broken_log(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, speed_mm_s=150.0)
    good = tmp_path / "good.jsonl"
    assert cli.main(["simulate", "--config", cfg, "--out", str(good)]) == 0
    broken = tmp_path / "broken.jsonl"
    broken.write_text("this is not json\n")
    capsys.readouterr()

    json_path = tmp_path / "r.json"
    rc = cli.main(
        [
            "metrics",
            "--logs",
            str(good),
            str(broken),
            "--json",
            str(json_path),
            "--no-figures",
        ]
    )
    assert rc == 0
    err = capsys.readouterr().err
    assert "skipped" in err
    report = json.loads(json_path.read_text())
    assert len(report["sessions"]) == 1
    assert len(report["errors"]) == 1
    assert not (tmp_path / "r-figures").exists()


def test_cli_replay_capture_matches_original(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, speed_mm_s=150.0)
    orig = tmp_path / "orig.jsonl"
    assert cli.main(["simulate", "--config", cfg, "--out", str(orig)]) == 0
    cap = tmp_path / "cap.jsonl"
    capsys.readouterr()
    rc = cli.main(
        ["replay", "--log", str(orig), "--speed", "1000", "--capture", str(cap)]
    )
    assert rc == 0
    stream = capsys.readouterr().out
    last = None
    for line in stream.splitlines():
        frame = decode_frame(line, role="server", last_seq=last)
        last = frame["seq"]
    assert session_metrics(SessionLog.read(cap)) == session_metrics(
        SessionLog.read(orig)
    )


def test_cli_replay_argument_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["replay", "--log", "x.jsonl", "--speed=-1"])
    assert exc.value.code == 2
    capsys.readouterr()
    assert cli.main(["replay", "--log", str(tmp_path / "missing.jsonl")]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_serve_rejects_bad_config(tmp_path, capsys):
    bad = _write_cfg(tmp_path, mode="telepathy")
    assert cli.main(["serve", "--config", bad, "--port", "0"]) == 2
    assert "mode" in capsys.readouterr().err
