"""Command line entry points: simulate, metrics, serve, replay.

Exit codes: 0 success, 1 runtime failure, 2 bad arguments or config,
3 IK fault overflow during simulation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import figures, replay as replay_mod, server as server_mod
from .agents import parse_agent_spec, run_scripted_agent
from .config import MODES, ConfigError, SessionConfig, load_config
from .metrics import Trajectory, build_report, session_metrics, write_csv
from .sessionlog import LogError, MalformedLogLine, SessionLog
from .simcore import FaultOverflow, SquareTask

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_FAULT_OVERFLOW = 3


def _setup_logging() -> None:
    level_name = os.environ.get("COBOTAR_LOG_LEVEL", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _load_cfg(path) -> SessionConfig:
    if path is None:
        return SessionConfig()
    return load_config(path)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cobotar",
        description="Desk-scale digital twin of a projected-GUI cobot interface",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scripted agent and write its log")
    sim.add_argument("--config", help="JSON config file (defaults when omitted)")
    sim.add_argument(
        "--agent",
        default="perfect",
        help="perfect or noisy:SEED[:SIGMA]",
    )
    sim.add_argument("--mode", choices=MODES, help="override the config mode")
    sim.add_argument("--out", required=True, help="output JSONL log path")

    met = sub.add_parser("metrics", help="per-session metrics and statistics")
    met.add_argument("--task", choices=["square"], default="square")
    met.add_argument("--logs", nargs="+", required=True, help="session logs")
    met.add_argument("--json", required=True, help="report output path")
    met.add_argument("--csv", help="per-session CSV path (default: beside --json)")
    met.add_argument(
        "--figdir", help="figure directory (default: <json stem>-figures)"
    )
    met.add_argument(
        "--no-figures", action="store_true", help="skip figure rendering"
    )

    srv = sub.add_parser("serve", help="run the live session server")
    srv.add_argument("--config", help="JSON config file")
    srv.add_argument("--port", type=int, required=True)
    srv.add_argument("--host", default="127.0.0.1")

    rep = sub.add_parser("replay", help="re-emit a log as protocol frames")
    rep.add_argument("--log", required=True)
    rep.add_argument(
        "--speed",
        type=_positive_float,
        default=1.0,
        help="speed multiplier (2 plays twice as fast)",
    )
    rep.add_argument(
        "--capture", help="also reconstruct a session log from the stream"
    )
    return p


def cmd_simulate(args) -> int:
    try:
        cfg = _load_cfg(args.config)
        if args.mode:
            cfg = cfg.with_mode(args.mode)
        spec = parse_agent_spec(args.agent, default_sigma=cfg.sigma)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        log = run_scripted_agent(spec, None, cfg)
    except FaultOverflow as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAULT_OVERFLOW
    log.write(args.out)
    row = session_metrics(log)
    print(
        f"{row['interface']} {spec.kind} agent: "
        f"time {row['time_s']:.2f} s, path error {row['error_mm']:.3f} mm, "
        f"faults {row['faults']} -> {args.out}"
    )
    return EXIT_OK


def cmd_metrics(args) -> int:
    named, parse_errors = [], []
    for path in args.logs:
        try:
            named.append((path, SessionLog.read(path)))
        except MalformedLogLine as e:
            parse_errors.append({"log": str(path), "error": str(e)})
        except (OSError, LogError) as e:
            parse_errors.append({"log": str(path), "error": str(e)})
    report = build_report(named)
    report["errors"] = parse_errors + report["errors"]

    with open(args.json, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    csv_path = args.csv or os.path.splitext(args.json)[0] + ".csv"
    write_csv(report["sessions"], csv_path)
    outputs = [args.json, csv_path]

    if not args.no_figures:
        figdir = args.figdir or os.path.splitext(args.json)[0] + "-figures"
        trajs, task = [], None
        for path, log in named[:6]:
            try:
                meta = log.session_meta()
                task = SquareTask(
                    tuple(meta["task"]["center_mm"]), meta["task"]["side_mm"]
                )
                trajs.append(
                    (
                        os.path.basename(str(path)),
                        Trajectory.from_log(log, log.task_window()),
                    )
                )
            except Exception:
                continue
        outputs.extend(figures.render_report_figures(report, trajs, task, figdir))

    for row in report["sessions"]:
        print(
            f"{row['log']}: {row['interface']} participant {row['participant']} "
            f"time {row['time_s']:.2f} s error {row['error_mm']:.3f} mm"
        )
    for err in report["errors"]:
        print(f"{err['log']}: skipped ({err['error']})", file=sys.stderr)
    for a in report["analyses"]:
        df = ",".join(f"{v:g}" for v in a["df"])
        print(
            f"{a['metric']} {a['test']}({df}): statistic {a['value']:.4f} "
            f"p {a['p']:.4g}"
        )
    print(f"wrote {', '.join(outputs)}")
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        cfg = _load_cfg(args.config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return server_mod.run_server(cfg, args.port, host=args.host)


def cmd_replay(args) -> int:
    try:
        replay_mod.run_replay(
            args.log, args.speed, capture_path=args.capture
        )
    except (OSError, LogError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "metrics": cmd_metrics,
    "serve": cmd_serve,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
