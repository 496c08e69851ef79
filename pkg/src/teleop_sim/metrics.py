"""Tracking-error indices and packet timing statistics for run traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DOF, US_PER_MS, Direction
from .errors import ArityError


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    e: np.ndarray  # (T, 7) position error, rad
    edot: np.ndarray  # (T, 7) velocity error, rad/s

    @property
    def T(self) -> int:
        return int(self.e.shape[0])


@dataclass(frozen=True, eq=False)
class ErrorIndex:
    epsilon: float
    epsilon_dot: float
    rms: np.ndarray
    rms_dot: np.ndarray


@dataclass(frozen=True)
class TimingStats:
    """Summary of a list of durations, all in milliseconds.

    ``sigma`` is the population standard deviation; ``iqr`` uses linear
    interpolation between order statistics.
    """

    n: int
    mean: float
    sigma: float
    range: float
    iqr: float


def error_series(trace) -> ErrorSeries:
    return ErrorSeries(np.asarray(trace.q_l) - np.asarray(trace.q_f),
                       np.asarray(trace.qd_l) - np.asarray(trace.qd_f))


def rms_per_joint(series, T: int | None = None) -> np.ndarray:
    """Root mean square over time of each column; divides by the sample count."""
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape[0] == 0:
        raise ArityError("RMS of an empty series")
    if T is not None and T != arr.shape[0]:
        raise ArityError(f"tick count {T} does not match series length {arr.shape[0]}")
    # scale by the column maximum so squaring neither underflows nor overflows
    scale = np.max(np.abs(arr), axis=0)
    safe = np.where(scale > 0, scale, 1.0)
    z = arr / safe
    return scale * np.sqrt(np.mean(z * z, axis=0))


def error_index(series: ErrorSeries) -> ErrorIndex:
    rms = rms_per_joint(series.e)
    rms_dot = rms_per_joint(series.edot)
    return ErrorIndex(float(np.sum(rms)), float(np.sum(rms_dot)), rms, rms_dot)


def quantile(values, p: float) -> float:
    """Linear interpolation between order statistics at position 1 + (n-1) p."""
    return float(np.quantile(np.asarray(values, dtype=float), p, method="linear"))


def five_number(values) -> tuple[float, float, float, float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ArityError("five-number summary of an empty sample")
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    return float(v.min()), float(q1), float(med), float(q3), float(v.max())


def timing_stats(samples_us) -> TimingStats:
    v = np.asarray(samples_us, dtype=float) / US_PER_MS
    if v.size == 0:
        raise ArityError("timing statistics of an empty sample")
    q1, q3 = np.quantile(v, [0.25, 0.75], method="linear")
    return TimingStats(int(v.size), float(v.mean()), float(v.std()), float(v.max() - v.min()), float(q3 - q1))


def trace_timing(trace, direction, which: str) -> np.ndarray:
    """``t_send`` or ``t_recv`` samples (us) of the packets sent in ``direction``."""
    return trace.packets.select(Direction(direction))[which]


METRIC_COLUMNS = (
    ["run_id", "transport", "seed", "epsilon", "epsilon_dot"]
    + [f"rms_{i}" for i in range(DOF)]
    + [f"rms_dot_{i}" for i in range(DOF)]
    + ["condition", "block", "t_send_lead_ms", "t_recv_lead_ms", "t_send_follow_ms", "t_recv_follow_ms"]
)


def metrics_row(run_id: str, transport: str, seed: int, trace, condition: str = "", block: str = "") -> list:
    idx = error_index(error_series(trace))
    lead = trace.packets.select(Direction.LEADER_TO_FOLLOWER)
    follow = trace.packets.select(Direction.FOLLOWER_TO_LEADER)

    def mean_ms(x):
        return repr(float(np.mean(x)) / US_PER_MS) if len(x) else "nan"

    return (
        [run_id, transport, str(seed), repr(idx.epsilon), repr(idx.epsilon_dot)]
        + [repr(float(x)) for x in idx.rms]
        + [repr(float(x)) for x in idx.rms_dot]
        + [condition, block, mean_ms(lead["t_send"]), mean_ms(lead["t_recv"]),
           mean_ms(follow["t_send"]), mean_ms(follow["t_recv"])]
    )


TIMING_ROWS = ("N", "Mean (ms)", "sigma", "Range (ms)", "IQR (ms)")


def timing_table_rows(columns: list[tuple[str, TimingStats]]) -> list[list[str]]:
    """Rows in the layout of the timing tables: one statistic per row."""
    rows = []
    for label, attr in zip(TIMING_ROWS, ("n", "mean", "sigma", "range", "iqr")):
        row = [label]
        for _, st in columns:
            val = getattr(st, attr)
            row.append(str(val) if attr == "n" else f"{val:.6g}")
        rows.append(row)
    return rows
