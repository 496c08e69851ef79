"""One-way message transports: wired and Wi-Fi reliable streams, and a
cycle-scheduled (TDMA-style) low-power link.

Every transport is reliable: a packet is never dropped, retransmissions only
show up as extra delay. Delivery is in order per direction, so a slow packet
blocks the ones queued behind it (head-of-line blocking).

All delays are integer microseconds.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ControlPacket, Direction, JointVector, RngStream, SimTime
from .errors import ConfigError, SamplerError

KINDS = ("wired", "wireless", "gallop")
DEFAULT_CYCLE_US = 50_000


@dataclass(frozen=True)
class DelaySampler:
    """Nonnegative delay distribution.

    ``constant``: always ``shift_us``.
    ``shifted-gamma``: ``shift_us + Gamma(shape, scale_us)``.
    ``mixture``: ``base + Bernoulli(prob) * spike`` (an additive spike).
    """

    family: str
    shift_us: float = 0.0
    shape: float = 1.0
    scale_us: float = 0.0
    base: "DelaySampler | None" = None
    prob: float = 0.0
    spike: "DelaySampler | None" = None

    def __post_init__(self):
        if self.family == "constant":
            if not self.shift_us >= 0:
                raise SamplerError(f"constant delay must be >= 0, got {self.shift_us}")
        elif self.family == "shifted-gamma":
            if not self.shift_us >= 0:
                raise SamplerError(f"shift must be >= 0, got {self.shift_us}")
            if not (self.shape > 0 and self.scale_us > 0):
                raise SamplerError(f"gamma shape and scale must be positive, got shape={self.shape}, scale={self.scale_us}")
        elif self.family == "mixture":
            if self.base is None or self.spike is None:
                raise SamplerError("mixture needs both a base and a spike sampler")
            if not 0.0 <= self.prob <= 1.0:
                raise SamplerError(f"spike probability must lie in [0, 1], got {self.prob}")
        else:
            raise SamplerError(f"unknown sampler family {self.family!r}")

    @classmethod
    def constant(cls, us: float) -> "DelaySampler":
        return cls("constant", shift_us=float(us))

    @classmethod
    def shifted_gamma(cls, shift_us: float, shape: float, scale_us: float) -> "DelaySampler":
        return cls("shifted-gamma", shift_us=float(shift_us), shape=float(shape), scale_us=float(scale_us))

    @classmethod
    def from_moments(cls, shift_us: float, mean_us: float, sigma_us: float) -> "DelaySampler":
        """Shifted gamma with the given overall mean and standard deviation."""
        excess = mean_us - shift_us
        if excess <= 0 or sigma_us <= 0:
            raise SamplerError("mean must exceed shift and sigma must be positive")
        return cls.shifted_gamma(shift_us, (excess / sigma_us) ** 2, sigma_us ** 2 / excess)

    @classmethod
    def mixture(cls, base: "DelaySampler", prob: float, spike: "DelaySampler") -> "DelaySampler":
        return cls("mixture", base=base, prob=float(prob), spike=spike)

    @property
    def mean_us(self) -> float:
        if self.family == "constant":
            return self.shift_us
        if self.family == "shifted-gamma":
            return self.shift_us + self.shape * self.scale_us
        return self.base.mean_us + self.prob * self.spike.mean_us

    def describe(self) -> str:
        if self.family == "constant":
            return f"constant({_fmt(self.shift_us)})"
        if self.family == "shifted-gamma":
            return f"gamma(shift={_fmt(self.shift_us)}, shape={_fmt(self.shape)}, scale={_fmt(self.scale_us)})"
        return f"mixture({self.base.describe()}, {_fmt(self.prob)}, {self.spike.describe()})"


def _fmt(x: float) -> str:
    return repr(float(x)) if x != int(x) else str(int(x))


def _draw(sampler: DelaySampler, rng: RngStream) -> float:
    if sampler.family == "constant":
        return sampler.shift_us
    if sampler.family == "shifted-gamma":
        return sampler.shift_us + rng.gamma(sampler.shape, sampler.scale_us)
    value = _draw(sampler.base, rng)
    # p == 0 consumes nothing extra, so the draws equal the base sampler's
    if sampler.prob > 0.0 and rng.uniform() < sampler.prob:
        value += _draw(sampler.spike, rng)
    return value


def _to_us(x: float) -> int:
    return int(math.floor(x + 0.5))


def sample_delay(sampler: DelaySampler, rng: RngStream) -> int:
    """One delay draw in whole microseconds (round half up)."""
    return _to_us(_draw(sampler, rng))


@dataclass(frozen=True)
class DeliveryEvent:
    packet: ControlPacket
    deliver_at: SimTime
    t_send: int
    t_recv: int
    blocked_us: int = 0  # part of t_recv added by in-order clamping

    @property
    def latency(self) -> int:
        return self.t_send + self.t_recv


@dataclass(eq=False)
class TransportConfig:
    """Delay model of one direction of one link, with its own random stream.

    Mutable: it remembers the last delivery time so that ``submit`` can enforce
    in-order delivery. One owner at a time.
    """

    kind: str
    send_overhead: DelaySampler
    receive_path: DelaySampler
    rng: RngStream
    spike_prob: float = 0.0
    spike_delay: DelaySampler | None = None
    cycle_us: int = DEFAULT_CYCLE_US
    cycle_phase_us: int = 0
    overrun_prob: float = 0.0
    overrun_delay: DelaySampler | None = None
    last_deliver_at: int = field(default=-1, init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown transport kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not 0.0 <= self.spike_prob <= 1.0:
            raise ConfigError(f"spike_prob must lie in [0, 1], got {self.spike_prob}")
        if self.spike_prob > 0 and self.spike_delay is None:
            raise ConfigError("spike_prob > 0 requires a spike_delay sampler")
        if not 0.0 <= self.overrun_prob <= 1.0:
            raise ConfigError(f"overrun_prob must lie in [0, 1], got {self.overrun_prob}")
        if self.overrun_prob > 0 and self.overrun_delay is None:
            raise ConfigError("overrun_prob > 0 requires an overrun_delay sampler")
        if int(self.cycle_us) <= 0:
            raise ConfigError(f"cycle_us must be positive, got {self.cycle_us}")
        self.cycle_us = int(self.cycle_us)
        self.cycle_phase_us = int(self.cycle_phase_us) % self.cycle_us

    @property
    def recv_sampler(self) -> DelaySampler:
        if self.kind == "wireless" and self.spike_prob > 0:
            return DelaySampler.mixture(self.receive_path, self.spike_prob, self.spike_delay)
        return self.receive_path

    def reset(self):
        self.last_deliver_at = -1

    def replace(self, **changes) -> "TransportConfig":
        """Copy with fields replaced; the copy starts with fresh in-order state."""
        fields = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.init}
        fields.update(changes)
        return TransportConfig(**fields)

    def describe(self) -> dict:
        out = {
            "kind": self.kind,
            "send_overhead": self.send_overhead.describe(),
            "receive_path": self.receive_path.describe(),
        }
        if self.kind == "wireless":
            out["spike_prob"] = _fmt(self.spike_prob)
            out["spike_delay"] = self.spike_delay.describe() if self.spike_delay else "none"
        if self.kind == "gallop":
            out["cycle_us"] = str(self.cycle_us)
            out["cycle_phase_us"] = str(self.cycle_phase_us)
            out["overrun_prob"] = _fmt(self.overrun_prob)
        return out


def time_to_cycle_boundary(now: SimTime, cycle_us: int, phase_us: int = 0) -> int:
    """Microseconds from ``now`` to the next boundary at ``phase + m*cycle``.

    A packet handed over exactly on a boundary waits zero.
    """
    return (phase_us - now) % cycle_us


def submit(config: TransportConfig, packet: ControlPacket, now: SimTime) -> DeliveryEvent:
    if now != packet.sent_at:
        raise ValueError(f"submit at t={now} of a packet stamped {packet.sent_at}")
    rng = config.rng
    if config.kind == "gallop":
        t_send = time_to_cycle_boundary(now, config.cycle_us, config.cycle_phase_us)
        t_send += sample_delay(config.send_overhead, rng)
        if config.overrun_prob > 0 and rng.uniform() < config.overrun_prob:
            t_send += sample_delay(config.overrun_delay, rng)
        t_recv = sample_delay(config.receive_path, rng)
    else:
        t_send = sample_delay(config.send_overhead, rng)
        t_recv = sample_delay(config.recv_sampler, rng)
    deliver_at = now + t_send + t_recv
    blocked = 0
    if deliver_at < config.last_deliver_at:
        blocked = config.last_deliver_at - deliver_at
        deliver_at = config.last_deliver_at
        t_recv += blocked
    config.last_deliver_at = deliver_at
    return DeliveryEvent(packet, deliver_at, t_send, t_recv, blocked)


# Preset parameters, microseconds. Base delays are shifted gammas fitted to the
# measured mean and standard deviation of each link; see README for the table.
_WIRED_SEND = DelaySampler.from_moments(50, 116, 127)
_WIRED_RECV = DelaySampler.from_moments(200, 1260, 2370)
_WIRELESS_SEND = DelaySampler.from_moments(60, 178, 176)
_WIRELESS_RECV_BASE = DelaySampler.from_moments(300, 2900, 4000)
_WIRELESS_SPIKE = DelaySampler.from_moments(400_000, 1_000_000, 150_000)
_WIRELESS_SPIKE_PROB = 0.01
_GALLOP_OVERHEAD = DelaySampler.constant(100)
_GALLOP_RECV = DelaySampler.from_moments(300, 688, 800)
# the comm loop fires just after a cycle boundary; the lead is drawn once per run
_GALLOP_LEAD_RANGE_US = (500, 1500)


def draw_cycle_phase(rng: RngStream, cycle_us: int = DEFAULT_CYCLE_US) -> int:
    """Cycle phase placing a boundary 0.5-1.5 ms before each comm tick at t = m*cycle."""
    lo, hi = _GALLOP_LEAD_RANGE_US
    lead = lo + int(math.floor(rng.uniform() * (hi - lo + 1)))
    return (cycle_us - lead) % cycle_us


def preset(kind: str, seed: int, stream_id: int = 0, cycle_phase_us: int | None = None) -> TransportConfig:
    """Calibrated transport for one direction.

    For ``gallop`` the cycle phase is drawn from the config's own stream unless
    given explicitly (the simulator draws one phase per run and shares it).
    """
    rng = RngStream(seed, stream_id)
    if kind == "wired":
        return TransportConfig("wired", _WIRED_SEND, _WIRED_RECV, rng)
    if kind == "wireless":
        return TransportConfig(
            "wireless", _WIRELESS_SEND, _WIRELESS_RECV_BASE, rng,
            spike_prob=_WIRELESS_SPIKE_PROB, spike_delay=_WIRELESS_SPIKE,
        )
    if kind == "gallop":
        phase = draw_cycle_phase(rng) if cycle_phase_us is None else cycle_phase_us
        return TransportConfig("gallop", _GALLOP_OVERHEAD, _GALLOP_RECV, rng, cycle_phase_us=phase)
    raise ConfigError(f"unknown transport kind {kind!r}; expected one of {', '.join(KINDS)}")


_DUMMY = JointVector.zeros()


def sample_timings(config: TransportConfig, n: int, spacing_us: int = 50_000, start_us: int = 0,
                   effective: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Submit ``n`` packets at a fixed spacing and return (t_send, t_recv) in us.

    By default ``t_recv`` is the raw draw without head-of-line blocking; with
    ``effective=True`` the blocking added by in-order delivery is included.
    """
    send = np.empty(n, dtype=np.int64)
    recv = np.empty(n, dtype=np.int64)
    for i in range(n):
        now = start_us + i * spacing_us
        pkt = ControlPacket(i, now, (_DUMMY, _DUMMY), Direction.LEADER_TO_FOLLOWER)
        ev = submit(config, pkt, now)
        send[i] = ev.t_send
        recv[i] = ev.t_recv if effective else ev.t_recv - ev.blocked_us
    return send, recv
