"""Joint-space arm plant, the bilateral control laws and the synthetic operator.

Each arm is a decoupled diagonal-inertia double integrator with viscous
damping. The follower tracks the (held) leader state with a PD law, the
leader is driven toward the operator reference by its own PD loop and feels
the follower's external torque scaled by ``K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import DOF, US_PER_S, JointVector, RngStream, SimTime, as_dof_array
from .errors import ConfigError, GainError, IntegrationError

JOINT_LIMIT = 2.0 * math.pi
CONTROL_PERIOD_US = 1000

DEFAULT_P = 50.0
DEFAULT_D = 14.1
DEFAULT_K = 0.3
DEFAULT_INERTIA = 1.0
DEFAULT_DAMPING = 0.5


@dataclass(frozen=True)
class ArmState:
    q: JointVector
    qdot: JointVector

    @classmethod
    def rest(cls, q=None) -> "ArmState":
        q = JointVector.zeros() if q is None else JointVector(q)
        return cls(q, JointVector.zeros())

    def kinetic_energy(self, model: "ArmModel") -> float:
        v = self.qdot.values
        return float(np.sum(model.inertia * v * v) / 2.0)


@dataclass(frozen=True, eq=False)
class ControlGains:
    """Diagonal PD gains for the follower (and the leader's reference loop) plus
    the force-feedback scale ``K`` in (0, 1)."""

    P: np.ndarray = field(default_factory=lambda: np.full(DOF, DEFAULT_P))
    D: np.ndarray = field(default_factory=lambda: np.full(DOF, DEFAULT_D))
    K: float = DEFAULT_K

    def __post_init__(self):
        p = as_dof_array(self.P, "P")
        d = as_dof_array(self.D, "D")
        if np.any(p <= 0):
            raise GainError(f"all P gains must be positive, got {p.tolist()}")
        if np.any(d <= 0):
            raise GainError(f"all D gains must be positive, got {d.tolist()}")
        _check_k(self.K)
        p.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "P", p)
        object.__setattr__(self, "D", d)
        object.__setattr__(self, "K", float(self.K))


@dataclass(frozen=True, eq=False)
class ArmModel:
    inertia: np.ndarray = field(default_factory=lambda: np.full(DOF, DEFAULT_INERTIA))
    damping: np.ndarray = field(default_factory=lambda: np.full(DOF, DEFAULT_DAMPING))

    def __post_init__(self):
        inertia = as_dof_array(self.inertia, "inertia")
        damping = as_dof_array(self.damping, "damping")
        if np.any(inertia <= 0):
            raise ConfigError(f"inertia must be positive, got {inertia.tolist()}")
        if np.any(damping < 0):
            raise ConfigError(f"damping must be nonnegative, got {damping.tolist()}")
        inertia.setflags(write=False)
        damping.setflags(write=False)
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "damping", damping)


def _check_k(k):
    if not (0.0 < k < 1.0):
        raise GainError(f"feedback scale K must lie in (0, 1), got {k}")


def leader_torque(K: float, tau_ext_follower: JointVector) -> JointVector:
    """Leader command torque: the follower's external torque scaled by K."""
    _check_k(K)
    return JointVector(K * tau_ext_follower.values)


def follower_torque(gains: ControlGains, leader: ArmState, follower: ArmState) -> JointVector:
    """Follower PD torque toward the leader.

    Uses the tracking-stable sign ``P (qL - qF) + D (qdL - qdF)``.
    """
    pos_err = leader.q.values - follower.q.values
    vel_err = leader.qdot.values - follower.qdot.values
    return JointVector(gains.P * pos_err + gains.D * vel_err)


def external_torque_estimate(gains: ControlGains, follower: ArmState, contact) -> JointVector:
    """Torque reported back to the leader; the scripted contact torque itself."""
    return contact if isinstance(contact, JointVector) else JointVector(contact)


def integrate(q, qd, torque, inertia, damping, dt_s, limit=JOINT_LIMIT):
    """Semi-implicit Euler step on raw arrays, with joint-limit clamping.

    The arithmetic order here is mirrored exactly by both tick kernels.
    """
    acc = (torque - damping * qd) / inertia
    qd_new = qd + dt_s * acc
    q_new = q + dt_s * qd_new
    hi = q_new > limit
    lo = q_new < -limit
    if hi.any() or lo.any():
        q_new = np.where(hi, limit, np.where(lo, -limit, q_new))
        qd_new = np.where(hi | lo, 0.0, qd_new)
    return q_new, qd_new


def step_arm(model: ArmModel, state: ArmState, applied_torque, dt: SimTime = CONTROL_PERIOD_US) -> ArmState:
    if dt <= 0:
        raise ConfigError(f"integration step must be positive, got {dt} us")
    tau = applied_torque.values if isinstance(applied_torque, JointVector) else np.asarray(applied_torque, float)
    if tau.shape != (DOF,) or not np.all(np.isfinite(tau)):
        raise IntegrationError(f"non-finite or malformed applied torque {np.asarray(tau).tolist()}")
    q, qd = integrate(state.q.values, state.qdot.values, tau, model.inertia, model.damping, dt / US_PER_S)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
        raise IntegrationError("arm state became non-finite")
    return ArmState(JointVector(q), JointVector(qd))


@dataclass(frozen=True)
class Waypoint:
    q: JointVector
    move_s: float = 1.0
    hold_s: float = 0.0


@dataclass(frozen=True, eq=False)
class OperatorTrajectory:
    """Scripted stand-in for the human moving the leader arm.

    ``kind="sinusoidal"`` uses per-joint amplitude (rad), frequency (Hz) and
    phase (rad). ``kind="waypoint"`` moves between waypoints with cubic
    smoothstep segments (zero velocity at each waypoint) and optional holds.
    """

    kind: str = "sinusoidal"
    amplitude: np.ndarray | None = None
    frequency: np.ndarray | None = None
    phase: np.ndarray | None = None
    waypoints: tuple = ()

    def __post_init__(self):
        if self.kind == "sinusoidal":
            for name in ("amplitude", "frequency", "phase"):
                raw = getattr(self, name)
                arr = as_dof_array(0.0 if raw is None else raw, name)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
            if np.any(self.frequency < 0):
                raise ConfigError("sinusoid frequencies must be nonnegative")
        elif self.kind == "waypoint":
            wps = tuple(self.waypoints)
            if not wps:
                raise ConfigError("waypoint trajectory needs at least one waypoint")
            for wp in wps:
                if wp.move_s <= 0 or wp.hold_s < 0:
                    raise ConfigError("waypoint move time must be > 0 and hold time >= 0")
            object.__setattr__(self, "waypoints", wps)
        else:
            raise ConfigError(f"unknown trajectory kind {self.kind!r}")

    @classmethod
    def sinusoidal(cls, amplitude, frequency, phase=0.0) -> "OperatorTrajectory":
        return cls("sinusoidal", amplitude, frequency, phase)

    @classmethod
    def still(cls) -> "OperatorTrajectory":
        return cls("sinusoidal", 0.0, 0.0, 0.0)


DEFAULT_TRAJECTORY = OperatorTrajectory.sinusoidal(
    amplitude=[0.5, 0.4, 0.3, 0.5, 0.3, 0.4, 0.2],
    frequency=[0.2, 0.25, 0.3, 0.2, 0.35, 0.25, 0.3],
    phase=0.0,
)


def pseudo_expert_trajectory(rng: RngStream) -> OperatorTrajectory:
    """Draw a random sinusoidal operator from a seeded stream."""
    g = rng.generator
    return OperatorTrajectory.sinusoidal(
        amplitude=g.uniform(0.2, 0.6, DOF),
        frequency=g.uniform(0.1, 0.4, DOF),
        phase=g.uniform(0.0, 2.0 * math.pi, DOF),
    )


def reference_series(traj: OperatorTrajectory, times_us) -> tuple[np.ndarray, np.ndarray]:
    """Reference positions and velocities, shape (len(times), 7)."""
    t = np.asarray(times_us, dtype=float).reshape(-1, 1) / US_PER_S
    if traj.kind == "sinusoidal":
        omega = 2.0 * math.pi * traj.frequency
        arg = omega * t + traj.phase
        return traj.amplitude * np.sin(arg), traj.amplitude * omega * np.cos(arg)
    return _waypoint_series(traj.waypoints, t[:, 0])


def _waypoint_series(waypoints: Sequence[Waypoint], t: np.ndarray):
    q = np.empty((t.size, DOF))
    qd = np.zeros((t.size, DOF))
    start = waypoints[0].q.values
    q[:] = start
    clock = waypoints[0].hold_s
    for prev, wp in zip(waypoints[:-1], waypoints[1:]):
        a, b = prev.q.values, wp.q.values
        t0, t1 = clock, clock + wp.move_s
        seg = (t >= t0) & (t < t1)
        s = (t[seg] - t0) / wp.move_s
        q[seg] = a + (b - a) * (s * s * (3.0 - 2.0 * s))[:, None]
        qd[seg] = (b - a) * (6.0 * s * (1.0 - s) / wp.move_s)[:, None]
        after = t >= t1
        q[after] = b
        qd[after] = 0.0
        clock = t1 + wp.hold_s
    return q, qd


def operator_reference(traj: OperatorTrajectory, t: SimTime) -> ArmState:
    q, qd = reference_series(traj, [t])
    return ArmState(JointVector(q[0]), JointVector(qd[0]))
