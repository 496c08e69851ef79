"""Discrete-event engine for one bilateral teleoperation run.

Two 1 kHz control loops (leader and follower) and two 20 Hz communication
loops share one event queue. Events at equal timestamps are processed in a
fixed order: packet deliveries, follower control, leader control, leader comm
tick, follower comm tick. Control ticks between two queue events see constant
held values, so whole spans of them are handed to the tick kernel at once.
"""

from __future__ import annotations

import heapq
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernel as _kernel
from .config import PSEUDO_EXPERT, ScenarioConfig, scenario_to_flat, trajectory_to_flat
from .core import DOF, US_PER_S, ControlPacket, Direction, JointVector, RngStream, derive_seed
from .dynamics import JOINT_LIMIT, external_torque_estimate, pseudo_expert_trajectory, reference_series
from .errors import IntegrationError, TeleopError
from .transport import DeliveryEvent, TransportConfig, draw_cycle_phase, preset, submit

log = logging.getLogger(__name__)

STREAM_L2F = 1
STREAM_F2L = 2
STREAM_TRAJECTORY = 3
STREAM_SCHEDULE = 4

_DELIVERY, _LEADER_COMM, _FOLLOWER_COMM = 0, 3, 4


@dataclass
class PacketLog:
    direction: list = field(default_factory=list)
    seq: list = field(default_factory=list)
    sent_at: list = field(default_factory=list)
    t_send: list = field(default_factory=list)
    t_recv: list = field(default_factory=list)
    deliver_at: list = field(default_factory=list)

    def append(self, ev: DeliveryEvent):
        self.direction.append(ev.packet.direction.value)
        self.seq.append(ev.packet.seq)
        self.sent_at.append(ev.packet.sent_at)
        self.t_send.append(ev.t_send)
        self.t_recv.append(ev.t_recv)
        self.deliver_at.append(ev.deliver_at)

    def __len__(self):
        return len(self.seq)

    def select(self, direction) -> dict[str, np.ndarray]:
        d = Direction(direction).value
        idx = [i for i, x in enumerate(self.direction) if x == d]
        return {
            "seq": np.asarray(self.seq, dtype=np.int64)[idx],
            "sent_at": np.asarray(self.sent_at, dtype=np.int64)[idx],
            "t_send": np.asarray(self.t_send, dtype=np.int64)[idx],
            "t_recv": np.asarray(self.t_recv, dtype=np.int64)[idx],
            "deliver_at": np.asarray(self.deliver_at, dtype=np.int64)[idx],
        }


@dataclass
class RunTrace:
    """State series at every control tick plus the per-packet timing log.

    Arrays ``q_l`` ... ``tau_f`` have shape (ticks, 7); ``t`` is int64 us.
    ``metadata`` is the flat echo of the scenario (plus the resolved
    trajectory when it was drawn from the seed).
    """

    t: np.ndarray
    q_l: np.ndarray
    qd_l: np.ndarray
    q_f: np.ndarray
    qd_f: np.ndarray
    tau_l: np.ndarray
    tau_f: np.ndarray
    packets: PacketLog
    metadata: dict
    config: ScenarioConfig | None = None

    STATE_FIELDS = ("q_l", "qd_l", "q_f", "qd_f", "tau_l", "tau_f")

    @property
    def n_ticks(self) -> int:
        return int(self.t.shape[0])

    def truncated(self, n: int) -> "RunTrace":
        return RunTrace(self.t[:n], *(getattr(self, f)[:n] for f in self.STATE_FIELDS),
                        packets=self.packets, metadata=self.metadata, config=self.config)


@dataclass
class RunFailure:
    config: ScenarioConfig
    seed: int
    error: str
    partial: RunTrace | None = None


def build_transports(cfg: ScenarioConfig) -> tuple[TransportConfig, TransportConfig]:
    """Per-direction transports with independent streams; one shared cycle phase."""
    phase = None
    if cfg.transport == "gallop":
        phase = cfg.transport_overrides.get("cycle_phase_us")
        if phase is None:
            cycle = cfg.transport_overrides.get("cycle_us", 50_000)
            phase = draw_cycle_phase(RngStream(cfg.seed, STREAM_SCHEDULE), cycle)
    out = []
    for stream in (STREAM_L2F, STREAM_F2L):
        tc = preset(cfg.transport, cfg.seed, stream, cycle_phase_us=phase if phase is not None else 0)
        if cfg.transport_overrides:
            tc = tc.replace(**cfg.transport_overrides)
        out.append(tc)
    return out[0], out[1]


def resolve_trajectory(cfg: ScenarioConfig):
    if isinstance(cfg.trajectory, str) and cfg.trajectory == PSEUDO_EXPERT:
        return pseudo_expert_trajectory(RngStream(cfg.seed, STREAM_TRAJECTORY))
    return cfg.trajectory


def _contact_series(cfg: ScenarioConfig, times: np.ndarray) -> np.ndarray:
    contact = np.zeros((times.size, DOF))
    for c in cfg.contacts:
        mask = (times >= c.start_us) & (times < c.end_us)
        contact[mask] = c.torque.values
    return contact


def run_scenario(config: ScenarioConfig, backend: str | None = None) -> RunTrace:
    """Simulate one run. Identical configs give bitwise-identical traces.

    Raises IntegrationError (carrying the trace prefix up to the failing tick)
    if the dynamics diverge.
    """
    advance = _kernel.get_advance(backend)
    cfg = config
    n = cfg.n_ticks
    dt_s = cfg.control_period_us / US_PER_S
    ctrl = cfg.control_period_us
    times = np.arange(n, dtype=np.int64) * ctrl

    traj = resolve_trajectory(cfg)
    q_ref, qd_ref = reference_series(traj, times)
    q_ref = np.ascontiguousarray(q_ref)
    qd_ref = np.ascontiguousarray(qd_ref)
    contact = _contact_series(cfg, times)

    if cfg.initial_leader is not None:
        q_l, qd_l = cfg.initial_leader.q.to_array(), cfg.initial_leader.qdot.to_array()
    else:
        q_l, qd_l = q_ref[0].copy(), qd_ref[0].copy()
    if cfg.initial_follower is not None:
        q_f, qd_f = cfg.initial_follower.q.to_array(), cfg.initial_follower.qdot.to_array()
    else:
        q_f, qd_f = q_l.copy(), qd_l.copy()
    # both sides start from the agreed leader home state and zero feedback
    held_q, held_qd = q_l.copy(), qd_l.copy()
    held_tau = np.zeros(DOF)

    outs = {f: np.zeros((n, DOF)) for f in RunTrace.STATE_FIELDS}
    metadata = scenario_to_flat(cfg)
    if isinstance(cfg.trajectory, str):
        metadata.update({f"resolved.{k}": v for k, v in trajectory_to_flat(traj).items()})
    packets = PacketLog()
    trace = RunTrace(times, outs["q_l"], outs["qd_l"], outs["q_f"], outs["qd_f"],
                     outs["tau_l"], outs["tau_f"], packets, metadata, cfg)

    tp_l2f, tp_f2l = build_transports(cfg)
    gains, lm, fm = cfg.gains, cfg.leader_model, cfg.follower_model
    p_gain, d_gain = np.ascontiguousarray(gains.P), np.ascontiguousarray(gains.D)

    queue: list = []
    counter = 0

    def push(time, prio, item):
        nonlocal counter
        heapq.heappush(queue, (time, prio, counter, item))
        counter += 1

    if cfg.leader_comm_phase_us < cfg.duration_us:
        push(cfg.leader_comm_phase_us, _LEADER_COMM, None)
    if cfg.follower_comm_phase_us < cfg.duration_us:
        push(cfg.follower_comm_phase_us, _FOLLOWER_COMM, None)
    seq = {Direction.LEADER_TO_FOLLOWER: 0, Direction.FOLLOWER_TO_LEADER: 0}
    next_k = 0

    def run_ticks(k_end):
        nonlocal next_k
        k_end = min(k_end, n)
        if k_end <= next_k:
            return
        failed = advance(next_k, k_end, dt_s, q_l, qd_l, q_f, qd_f, held_q, held_qd, held_tau,
                         q_ref, qd_ref, contact, p_gain, d_gain, gains.K,
                         lm.inertia, lm.damping, fm.inertia, fm.damping, JOINT_LIMIT,
                         outs["q_l"], outs["qd_l"], outs["q_f"], outs["qd_f"], outs["tau_l"], outs["tau_f"])
        if failed >= 0:
            raise IntegrationError(
                f"dynamics diverged at tick {failed} (t={failed * ctrl} us)", tick=failed,
                trace=trace.truncated(failed + 1),
            )
        next_k = k_end

    while queue:
        time, prio, _, item = queue[0]
        if time > cfg.duration_us:
            break
        # deliveries precede the control tick at the same instant; comm ticks follow it
        k_end = -(-time // ctrl) if prio == _DELIVERY else time // ctrl + 1
        run_ticks(k_end)
        heapq.heappop(queue)

        if prio == _DELIVERY:
            ev: DeliveryEvent = item
            if ev.packet.direction is Direction.LEADER_TO_FOLLOWER:
                held_q[:] = ev.packet.payload[0].values
                held_qd[:] = ev.packet.payload[1].values
            else:
                held_tau[:] = ev.packet.payload[0].values
            continue

        k = time // ctrl
        if prio == _LEADER_COMM:
            d = Direction.LEADER_TO_FOLLOWER
            payload = (JointVector(outs["q_l"][k]), JointVector(outs["qd_l"][k]))
            tp, phase_next = tp_l2f, time + cfg.comm_period_us
        else:
            d = Direction.FOLLOWER_TO_LEADER
            payload = (external_torque_estimate(gains, None, contact[k]),)
            tp, phase_next = tp_f2l, time + cfg.comm_period_us
        pkt = ControlPacket(seq[d], time, payload, d)
        seq[d] += 1
        ev = submit(tp, pkt, time)
        packets.append(ev)
        push(ev.deliver_at, _DELIVERY, ev)
        if phase_next < cfg.duration_us:
            push(phase_next, prio, None)

    run_ticks(n)
    return trace


def _run_one(args):
    cfg, backend = args
    try:
        return run_scenario(cfg, backend)
    except TeleopError as exc:
        partial = exc.trace if isinstance(exc, IntegrationError) else None
        return RunFailure(cfg, cfg.seed, f"{type(exc).__name__}: {exc}", partial)


def batch_configs(configs, repetitions: int) -> list[ScenarioConfig]:
    """Expand configs into per-repetition configs with derived seeds."""
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    return [c.with_seed(derive_seed(c.seed, r)) for c in configs for r in range(repetitions)]


def run_batch(configs, repetitions: int = 1, jobs: int = 1, backend: str | None = None) -> list:
    """Run every config ``repetitions`` times.

    Repetition ``r`` of config ``c`` uses seed ``derive_seed(c.seed, r)``.
    Output order is config-major, repetition-minor regardless of ``jobs``. A
    failing run yields a RunFailure in its slot instead of aborting the batch.
    """
    expanded = batch_configs(configs, repetitions)
    work = [(c, backend) for c in expanded]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, work))
    else:
        results = [_run_one(w) for w in work]
    for r in results:
        if isinstance(r, RunFailure):
            log.warning("run with seed %d failed: %s", r.seed, r.error)
    return results
