"""Domain value types, integer simulation time and seeded random streams.

Time is kept as integer microseconds everywhere so that the 1 kHz control
tick (1000 us) and the 20 Hz communication period (50000 us) are exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ArityError, ConfigError, ConstructionError

DOF = 7
SimTime = int

US_PER_MS = 1000
US_PER_S = 1_000_000

_SEED_MASK = (1 << 64) - 1


def seconds_to_us(seconds: float) -> SimTime:
    return int(round(seconds * US_PER_S))


def us_to_ms(us) -> float:
    return us / US_PER_MS


class JointVector:
    """Immutable 7-element vector of finite reals.

    Holds joint angles (rad), velocities (rad/s) or torques (N m); the role
    is carried by the variable name, not the type.
    """

    __slots__ = ("_v",)

    def __init__(self, values: Iterable[float]):
        arr = np.array(list(values) if not isinstance(values, np.ndarray) else values,
                       dtype=float).ravel()
        if arr.shape != (DOF,):
            raise ArityError(f"JointVector needs exactly {DOF} values, got {arr.size}")
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            i = int(bad[0])
            raise ConstructionError(f"element at index {i} is non-finite ({arr[i]!r})", index=i)
        arr.setflags(write=False)
        self._v = arr

    @classmethod
    def zeros(cls) -> "JointVector":
        return cls(np.zeros(DOF))

    @classmethod
    def full(cls, value: float) -> "JointVector":
        return cls(np.full(DOF, float(value)))

    def to_array(self) -> np.ndarray:
        """Return a writable copy as a float64 array."""
        return self._v.copy()

    @property
    def values(self) -> np.ndarray:
        return self._v

    def __len__(self):
        return DOF

    def __iter__(self):
        return iter(self._v.tolist())

    def __getitem__(self, i):
        return float(self._v[i])

    def __add__(self, other):
        if not isinstance(other, JointVector):
            return NotImplemented
        with np.errstate(over="ignore", invalid="ignore"):
            return JointVector(self._v + other._v)

    def __sub__(self, other):
        if not isinstance(other, JointVector):
            return NotImplemented
        with np.errstate(over="ignore", invalid="ignore"):
            return JointVector(self._v - other._v)

    def __mul__(self, scalar):
        other = scalar._v if isinstance(scalar, JointVector) else float(scalar)
        # overflow surfaces as a ConstructionError naming the joint
        with np.errstate(over="ignore", invalid="ignore"):
            return JointVector(self._v * other)

    __rmul__ = __mul__

    def __neg__(self):
        return JointVector(-self._v)

    def __eq__(self, other):
        if not isinstance(other, JointVector):
            return NotImplemented
        return bool(np.array_equal(self._v, other._v))

    def __hash__(self):
        return hash(self._v.tobytes())

    def __repr__(self):
        return f"JointVector({self._v.tolist()!r})"


def make_joint_vector(values: Sequence[float]) -> JointVector:
    return JointVector(values)


class Direction(str, enum.Enum):
    LEADER_TO_FOLLOWER = "leader-to-follower"
    FOLLOWER_TO_LEADER = "follower-to-leader"

    @property
    def payload_size(self) -> int:
        return 2 if self is Direction.LEADER_TO_FOLLOWER else 1

    @property
    def short(self) -> str:
        return "l2f" if self is Direction.LEADER_TO_FOLLOWER else "f2l"


@dataclass(frozen=True)
class ControlPacket:
    """One communication-loop message.

    Leader-to-follower packets carry (q, qdot) of the leader; follower-to-leader
    packets carry the follower's external torque.
    """

    seq: int
    sent_at: SimTime
    payload: tuple
    direction: Direction

    def __post_init__(self):
        if self.seq < 0:
            raise ConstructionError(f"negative sequence number {self.seq}")
        if self.sent_at < 0:
            raise ConstructionError(f"negative send time {self.sent_at}")
        direction = Direction(self.direction)
        object.__setattr__(self, "direction", direction)
        payload = tuple(self.payload)
        if len(payload) != direction.payload_size:
            raise ArityError(
                f"{direction.value} packet carries {direction.payload_size} vector(s), got {len(payload)}"
            )
        if not all(isinstance(v, JointVector) for v in payload):
            raise ConstructionError("packet payload must be JointVector instances")
        object.__setattr__(self, "payload", payload)


class RngStream:
    """Seeded random stream identified by ``(seed, stream_id)``.

    Built on numpy's PCG64 seeded through a SeedSequence of the pair, so the
    sequence is reproducible across runs and platforms and distinct stream ids
    give statistically independent sequences. Single owner: not thread safe.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if stream_id < 0:
            raise ConfigError(f"stream_id must be nonnegative, got {stream_id}")
        self.seed = int(seed) & _SEED_MASK
        self.stream_id = int(stream_id)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, self.stream_id])))

    def uniform(self) -> float:
        return float(self._gen.random())

    def gamma(self, shape: float, scale: float) -> float:
        return float(self._gen.gamma(shape, scale))

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int) -> int:
        return int(self._gen.integers(low, high))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def rng_next_uniform(stream: RngStream) -> float:
    return stream.uniform()


def derive_seed(seed: int, *path: int) -> int:
    """Derive a child 64-bit seed from a parent seed and an integer path."""
    ss = np.random.SeedSequence([int(seed) & _SEED_MASK, *[int(p) & _SEED_MASK for p in path]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def is_finite_array(arr) -> bool:
    return bool(np.all(np.isfinite(arr)))


def as_dof_array(values, name: str = "value") -> np.ndarray:
    """Broadcast a scalar or 7-sequence to a float array of length 7."""
    if np.isscalar(values):
        return np.full(DOF, float(values))
    arr = np.asarray(values, dtype=float).ravel()
    if arr.shape != (DOF,):
        raise ArityError(f"{name} must be a scalar or {DOF} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite values")
    return arr


__all__ = [
    "DOF", "SimTime", "US_PER_MS", "US_PER_S", "JointVector", "make_joint_vector",
    "Direction", "ControlPacket", "RngStream", "rng_next_uniform", "derive_seed",
    "seconds_to_us", "us_to_ms", "as_dof_array", "is_finite_array",
]
