"""Task evaluation: trajectory error against the square, completion
time, raw TLX aggregation, and the statistical battery (one-way ANOVA,
repeated-measures ANOVA, paired t-tests) with exact p-values through a
hand-rolled regularized incomplete beta function.

The beta evaluation is deliberately independent of scipy so the test
suite can cross-check it against an external reference.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .config import MODES
from .sessionlog import SessionLog, MissingMarkers
from .simcore import SquareTask


class MetricsError(Exception):
    pass


class ZeroVariance(MetricsError):
    pass


class ZeroVarianceDifferences(MetricsError):
    pass


class EmptyTrajectory(MetricsError):
    pass


# --- distributions ---------------------------------------------------------

_BETACF_MAX_ITERS = 300
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITERS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b), absolute error < 1e-12."""
    if a <= 0 or b <= 0:
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_tail_p(f: float, df1: float, df2: float) -> float:
    """Upper-tail p of the F distribution."""
    if f < 0:
        raise ValueError(f"F must be non-negative, got {f}")
    return incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))


def t_two_sided_p(t: float, df: float) -> float:
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class StatResult:
    statistic: float
    df: object  # (num, den) for F tests, a single value for t tests
    p_value: float

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p must lie in [0,1], got {self.p_value}")

    def df_list(self) -> list:
        if isinstance(self.df, tuple):
            return [float(v) for v in self.df]
        return [float(self.df)]


# --- tests ------------------------------------------------------------------


def one_way_anova(groups) -> StatResult:
    """Between-subjects one-way ANOVA; df = (k-1, N-k)."""
    gs = [np.asarray(g, dtype=float) for g in groups]
    if len(gs) < 2:
        raise ValueError(f"need at least 2 groups, got {len(gs)}")
    if any(len(g) < 2 for g in gs):
        raise ValueError("every group needs at least 2 observations")
    all_x = np.concatenate(gs)
    n_total = len(all_x)
    grand = all_x.mean()
    ss_between = sum(len(g) * (g.mean() - grand) ** 2 for g in gs)
    ss_within = sum(((g - g.mean()) ** 2).sum() for g in gs)
    if ss_between + ss_within == 0.0:
        raise ZeroVariance("total variance is zero")
    if ss_within == 0.0:
        raise ZeroVariance("within-group variance is zero")
    k = len(gs)
    df = (k - 1, n_total - k)
    f = (ss_between / df[0]) / (ss_within / df[1])
    return StatResult(float(f), df, f_tail_p(f, *df))


def rm_anova(matrix) -> StatResult:
    """Repeated-measures one-way ANOVA on an n-subjects x k-conditions
    matrix; the subject effect is removed, df = (k-1, (k-1)(n-1))."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {m.shape}")
    n, k = m.shape
    if n < 2 or k < 2:
        raise ValueError(f"need at least 2 subjects and 2 conditions, got {m.shape}")
    grand = m.mean()
    ss_cond = n * ((m.mean(axis=0) - grand) ** 2).sum()
    ss_subj = k * ((m.mean(axis=1) - grand) ** 2).sum()
    ss_total = ((m - grand) ** 2).sum()
    ss_err = ss_total - ss_cond - ss_subj
    if ss_err < 0:  # float cancellation on exactly additive data
        if ss_err < -1e-9 * max(ss_total, 1.0):
            raise ZeroVariance("error sum of squares is negative beyond tolerance")
        ss_err = 0.0
    df = (k - 1, (k - 1) * (n - 1))
    if ss_err == 0.0:
        if ss_cond == 0.0:
            raise ZeroVariance("condition and error variance are both zero")
        raise ZeroVariance("error variance is zero")
    f = (ss_cond / df[0]) / (ss_err / df[1])
    return StatResult(float(f), df, f_tail_p(f, *df))


def paired_t_test(a, b) -> StatResult:
    """Two-sided paired t-test; df = n-1."""
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    if xa.shape != xb.shape or xa.ndim != 1:
        raise ValueError(f"paired samples must be equal-length vectors")
    n = len(xa)
    if n < 2:
        raise ValueError(f"need at least 2 pairs, got {n}")
    d = xa - xb
    mean = d.mean()
    sd = d.std(ddof=1)
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return StatResult(0.0, df, 1.0)
        raise ZeroVarianceDifferences(
            f"differences are constant {mean:.6g} with zero spread"
        )
    t = mean / (sd / math.sqrt(n))
    return StatResult(float(t), df, t_two_sided_p(t, df))


# --- task metrics ------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Ordered (t, x, y) samples, seconds and millimeters."""

    t: np.ndarray
    xy: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        if len(t) != len(xy):
            raise ValueError("t and xy lengths differ")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "xy", xy)

    def __len__(self) -> int:
        return len(self.t)

    @staticmethod
    def from_log(log: SessionLog, window: tuple | None = None) -> "Trajectory":
        """TCP xy (mm) from sample records, optionally within [t0, t1]."""
        ts, xys = [], []
        for rec in log.samples():
            t = rec["t"]
            if window is not None and not window[0] <= t <= window[1]:
                continue
            ts.append(t)
            xys.append((rec["tcp"][0] * 1000.0, rec["tcp"][1] * 1000.0))
        return Trajectory(np.array(ts), np.array(xys).reshape(-1, 2))


def _segment_distances(pts: np.ndarray, a, b) -> np.ndarray:
    ab = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    ap = pts - np.asarray(a, dtype=float)
    denom = float(ab @ ab)
    s = np.clip((ap @ ab) / denom, 0.0, 1.0) if denom > 0 else np.zeros(len(pts))
    closest = np.asarray(a, dtype=float) + s[:, None] * ab
    return np.linalg.norm(pts - closest, axis=1)


def path_error(traj: Trajectory, task: SquareTask) -> float:
    """Mean distance (mm) from each sample to the square's perimeter."""
    if len(traj) == 0:
        raise EmptyTrajectory("trajectory has no samples")
    dists = np.stack(
        [_segment_distances(traj.xy, a, b) for a, b in task.segments_mm()]
    )
    return float(dists.min(axis=0).mean())


def completion_time(log: SessionLog) -> float:
    """Seconds between the task start and end markers."""
    t0, t1 = log.task_window()
    return t1 - t0


@dataclass(frozen=True)
class TlxSheet:
    mental: float
    physical: float
    temporal: float
    performance: float
    effort: float
    frustration: float

    def scores(self) -> tuple:
        return (
            self.mental,
            self.physical,
            self.temporal,
            self.performance,
            self.effort,
            self.frustration,
        )


def raw_tlx(sheet: TlxSheet, scale_max: float) -> float:
    """Unweighted mean of the six subscales rescaled to [0, 100]."""
    if scale_max <= 0:
        raise ValueError(f"scale_max must be positive, got {scale_max}")
    scores = sheet.scores()
    for s in scores:
        if not 0.0 <= s <= scale_max:
            raise ValueError(f"subscale score {s} outside [0, {scale_max}]")
    return sum(scores) / len(scores) / scale_max * 100.0


# --- session reports ----------------------------------------------------------


def session_metrics(log: SessionLog) -> dict:
    """Per-session row: participant, interface, time, error, tlx."""
    meta = log.session_meta()
    if meta is None or "task" not in meta:
        raise MetricsError("log has no session record with a task definition")
    task = SquareTask(
        tuple(meta["task"]["center_mm"]), float(meta["task"]["side_mm"])
    )
    window = log.task_window()
    traj = Trajectory.from_log(log, window)
    return {
        "participant": meta.get("seed", 0),
        "interface": meta.get("mode", "unknown"),
        "time_s": completion_time(log),
        "error_mm": path_error(traj, task),
        "tlx": None,
        "faults": len(log.faults()),
    }


def _digest(obj) -> str:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _analyses_for(metric: str, all_by_mode: dict, by_mode: dict) -> list:
    """Statistical battery over one per-session metric grouped by mode.

    all_by_mode holds every session value per mode (for the unpaired
    ANOVA); by_mode keys values by participant for the paired tests.
    """
    out = []
    modes = [m for m in MODES if len(all_by_mode.get(m, ())) >= 2]
    if len(modes) < 2:
        return out
    groups = [all_by_mode[m] for m in modes]
    group_data = {m: all_by_mode[m] for m in modes}
    try:
        r = one_way_anova(groups)
        out.append(
            {
                "metric": metric,
                "test": "one_way_anova",
                "groups": modes,
                "value": r.statistic,
                "df": r.df_list(),
                "p": r.p_value,
                "inputs_digest": _digest(group_data),
            }
        )
    except ZeroVariance:
        pass

    # repeated measures and pairwise tests need participants present in
    # every compared mode
    common = set.intersection(*(set(by_mode[m]) for m in modes))
    subjects = sorted(common)
    if len(subjects) >= 2:
        matrix = [[by_mode[m][s] for m in modes] for s in subjects]
        try:
            r = rm_anova(matrix)
            out.append(
                {
                    "metric": metric,
                    "test": "rm_anova",
                    "groups": modes,
                    "subjects": len(subjects),
                    "value": r.statistic,
                    "df": r.df_list(),
                    "p": r.p_value,
                    "inputs_digest": _digest(matrix),
                }
            )
        except ZeroVariance:
            pass
    for i in range(len(modes)):
        for j in range(i + 1, len(modes)):
            pair = sorted(set(by_mode[modes[i]]) & set(by_mode[modes[j]]))
            if len(pair) < 2:
                continue
            a = [by_mode[modes[i]][s] for s in pair]
            b = [by_mode[modes[j]][s] for s in pair]
            try:
                r = paired_t_test(a, b)
            except ZeroVarianceDifferences:
                continue
            out.append(
                {
                    "metric": metric,
                    "test": "paired_t",
                    "groups": [modes[i], modes[j]],
                    "subjects": len(pair),
                    "value": r.statistic,
                    "df": r.df_list(),
                    "p": r.p_value,
                    "inputs_digest": _digest([a, b]),
                }
            )
    return out


def build_report(named_logs) -> dict:
    """Full metrics report over (name, SessionLog) pairs.

    Sessions that fail to parse or lack markers land under "errors";
    statistics appear once at least two interface groups of two or more
    sessions exist.
    """
    rows, errors = [], []
    for name, log in named_logs:
        try:
            row = dict(session_metrics(log))
        except (MetricsError, MissingMarkers, KeyError, TypeError) as e:
            errors.append({"log": str(name), "error": str(e)})
            continue
        row["log"] = str(name)
        rows.append(row)

    analyses = []
    for metric in ("time_s", "error_mm"):
        all_by_mode, by_mode = {}, {}
        for row in rows:
            all_by_mode.setdefault(row["interface"], []).append(row[metric])
            by_mode.setdefault(row["interface"], {})[row["participant"]] = row[metric]
        analyses.extend(_analyses_for(metric, all_by_mode, by_mode))
    return {
        "task": "square",
        "sessions": rows,
        "errors": errors,
        "analyses": analyses,
    }


def write_csv(rows, path) -> None:
    """Delimited per-session export matching the report rows."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["participant", "interface", "time_s", "error_mm", "tlx"])
        for row in rows:
            w.writerow(
                [
                    row["participant"],
                    row["interface"],
                    f"{row['time_s']:.6f}",
                    f"{row['error_mm']:.6f}",
                    "" if row.get("tlx") is None else row["tlx"],
                ]
            )
