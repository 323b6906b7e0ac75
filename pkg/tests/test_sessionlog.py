import json

import pytest

from cobotar.sessionlog import (
    KINDS,
    LogError,
    MalformedLogLine,
    MissingMarkers,
    SessionLog,
    dumps_record,
    fault_record,
    input_record,
    press_record,
    sample_record,
)


def test_record_builders_serialize_to_exact_lines():
    assert (
        dumps_record(sample_record(0.02, [0.0, 1.5], [0.1, 0.2, 0.3], "cobotar"))
        == '{"kind":"sample","t":0.02,"q":[0.0,1.5],"tcp":[0.1,0.2,0.3],"mode":"cobotar"}'
    )
    assert (
        dumps_record(input_record(1.0, "task_start"))
        == '{"kind":"input","t":1.0,"event":"task_start"}'
    )
    assert (
        dumps_record(press_record(2.5, "+y", "activated"))
        == '{"kind":"press","t":2.5,"button":"+y","press":"activated"}'
    )
    assert (
        dumps_record(fault_record(3.0, "ik_not_converged", pos_err=0.01))
        == '{"kind":"fault","t":3.0,"reason":"ik_not_converged","pos_err":0.01}'
    )


def test_input_record_keeps_extra_fields():
    rec = input_record(0.0, "session", mode="pendant", seed=4)
    assert rec["mode"] == "pendant" and rec["seed"] == 4


def test_write_read_round_trip_is_byte_identical(tmp_path):
    log = SessionLog()
    log.append(input_record(0.0, "session", mode="gamepad", seed=1))
    log.append(sample_record(0.0, [0.0] * 6, [0.1, 0.2, 0.3], "gamepad"))
    log.append(input_record(0.0, "task_start"))
    log.append(press_record(0.5, "-x", "activated"))
    log.append(fault_record(0.7, "ik_not_converged"))
    log.append(input_record(1.0, "task_end"))
    path = tmp_path / "s.jsonl"
    log.write(path)
    text = path.read_text()
    assert text == log.dumps()
    again = SessionLog.read(path)
    assert again.dumps() == text


def test_append_rejects_unknown_kind():
    log = SessionLog()
    with pytest.raises(LogError, match="unknown record kind"):
        log.append({"kind": "telemetry", "t": 0.0})


def test_read_reports_malformed_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(
        dumps_record(sample_record(0.0, [0.0], [0, 0, 0], "cobotar"))
        + "\n{oops\n"
    )
    with pytest.raises(MalformedLogLine) as exc:
        SessionLog.read(path)
    assert exc.value.line_no == 2
    assert "invalid JSON" in str(exc.value)


def test_read_rejects_unknown_kinds(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"kind":"mystery","t":0}\n')
    with pytest.raises(MalformedLogLine) as exc:
        SessionLog.read(path)
    assert exc.value.line_no == 1


def test_read_skips_blank_lines(tmp_path):
    path = tmp_path / "s.jsonl"
    path.write_text('\n{"kind":"input","t":0.0,"event":"task_start"}\n\n')
    assert len(SessionLog.read(path)) == 1


def test_kind_views():
    log = SessionLog()
    log.append(sample_record(0.0, [0.0], [0, 0, 0], "cobotar"))
    log.append(press_record(0.1, "+x", "activated"))
    log.append(fault_record(0.2, "ik_not_converged"))
    log.append(sample_record(0.3, [0.0], [0, 0, 0], "cobotar"))
    assert len(log.samples()) == 2
    assert len(log.presses()) == 1
    assert len(log.faults()) == 1
    assert [r["kind"] for r in log] == ["sample", "press", "fault", "sample"]
    assert set(KINDS) == {"sample", "input", "press", "fault"}


def test_session_meta_lookup():
    log = SessionLog()
    assert log.session_meta() is None
    log.append(input_record(0.0, "session", mode="cobotar", seed=9))
    meta = log.session_meta()
    assert meta["mode"] == "cobotar" and meta["seed"] == 9


def test_task_window():
    log = SessionLog()
    log.append(input_record(1.0, "task_start"))
    log.append(input_record(5.5, "task_end"))
    assert log.task_window() == (1.0, 5.5)


def test_task_window_uses_first_start_and_last_end():
    log = SessionLog()
    log.append(input_record(1.0, "task_start"))
    log.append(input_record(2.0, "task_start"))
    log.append(input_record(3.0, "task_end"))
    log.append(input_record(4.0, "task_end"))
    assert log.task_window() == (1.0, 4.0)


def test_task_window_requires_both_markers():
    log = SessionLog()
    log.append(input_record(1.0, "task_start"))
    with pytest.raises(MissingMarkers):
        log.task_window()


def test_float_fidelity_through_json():
    t = 25.499999999999545
    rec = sample_record(t, [0.123456789012345], [t, 0, 0], "pendant")
    back = json.loads(dumps_record(rec))
    assert back["t"] == t
    assert back["q"][0] == 0.123456789012345
