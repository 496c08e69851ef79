"""RunTrace CSV serialization: a states file and a packets file per run.

Floats are written with ``repr`` (shortest round-trip form) so a trace read
back is bitwise equal to the one written.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .core import DOF
from .simulator import PacketLog, RunTrace

STATE_GROUPS = ("q_l", "qd_l", "q_f", "qd_f", "tau_l", "tau_f")
STATE_COLUMNS = ["t_us"] + [f"{g}_{i}" for g in STATE_GROUPS for i in range(DOF)]
PACKET_COLUMNS = ["direction", "seq", "sent_at_us", "t_send_us", "t_recv_us", "deliver_at_us"]


def states_csv(trace: RunTrace) -> str:
    block = np.hstack([getattr(trace, g) for g in STATE_GROUPS]).tolist()
    lines = [",".join(STATE_COLUMNS)]
    lines.extend(f"{t}," + ",".join(map(repr, row)) for t, row in zip(trace.t.tolist(), block))
    return "\n".join(lines) + "\n"


def packets_csv(trace: RunTrace) -> str:
    p = trace.packets
    lines = [",".join(PACKET_COLUMNS)]
    lines.extend(
        f"{d},{s},{a},{ts},{tr},{da}"
        for d, s, a, ts, tr, da in zip(p.direction, p.seq, p.sent_at, p.t_send, p.t_recv, p.deliver_at)
    )
    return "\n".join(lines) + "\n"


def write_trace(trace: RunTrace, states_path, packets_path) -> None:
    Path(states_path).write_text(states_csv(trace), encoding="utf-8", newline="\n")
    Path(packets_path).write_text(packets_csv(trace), encoding="utf-8", newline="\n")


def read_states(path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != STATE_COLUMNS:
            raise ValueError(f"{path}: unexpected states header")
        data = np.loadtxt(fh, delimiter=",", dtype=float, ndmin=2)
    if data.shape[1] != len(STATE_COLUMNS):
        raise ValueError(f"{path}: expected {len(STATE_COLUMNS)} columns, got {data.shape[1]}")
    out = {"t": data[:, 0].astype(np.int64)}
    for j, g in enumerate(STATE_GROUPS):
        out[g] = np.ascontiguousarray(data[:, 1 + j * DOF: 1 + (j + 1) * DOF])
    return out


def read_packets(path) -> PacketLog:
    log = PacketLog()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PACKET_COLUMNS:
            raise ValueError(f"{path}: unexpected packets header")
        for row in reader:
            if len(row) != len(PACKET_COLUMNS):
                raise ValueError(f"{path}: malformed packet row {row!r}")
            log.direction.append(row[0])
            log.seq.append(int(row[1]))
            log.sent_at.append(int(row[2]))
            log.t_send.append(int(row[3]))
            log.t_recv.append(int(row[4]))
            log.deliver_at.append(int(row[5]))
    return log


def read_trace(states_path, packets_path, metadata: dict | None = None) -> RunTrace:
    s = read_states(states_path)
    return RunTrace(s["t"], *(s[g] for g in STATE_GROUPS), packets=read_packets(packets_path),
                    metadata=dict(metadata or {}))


def rows_to_csv(header, rows) -> str:
    """Comma-delimited text with LF line endings and a header row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()
