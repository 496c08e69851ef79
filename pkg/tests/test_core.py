import math

import numpy as np
import pytest

from teleop_sim.core import (
    DOF, ControlPacket, Direction, JointVector, RngStream, derive_seed, make_joint_vector,
    rng_next_uniform, seconds_to_us, us_to_ms,
)
from teleop_sim.errors import ArityError, ConstructionError


def test_zero_vector():
    v = make_joint_vector([0] * 7)
    assert v == JointVector.zeros()
    assert np.all(v.values == 0.0)


def test_identity_construction():
    v = make_joint_vector([1, 2, 3, 4, 5, 6, 7])
    assert v[0] == 1 and v[6] == 7
    assert list(v) == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]


def test_nonfinite_element_names_index():
    with pytest.raises(ConstructionError) as exc:
        make_joint_vector([0, 0, math.nan, 0, 0, 0, 0])
    assert exc.value.index == 2
    assert "2" in str(exc.value)


@pytest.mark.parametrize("bad", [[1.0] * 6, [1.0] * 8, []])
def test_wrong_arity(bad):
    with pytest.raises(ArityError):
        make_joint_vector(bad)


def test_infinity_rejected():
    with pytest.raises(ConstructionError) as exc:
        JointVector([0, 0, 0, 0, 0, 0, -math.inf])
    assert exc.value.index == 6


def test_vector_is_immutable():
    v = JointVector.full(1.0)
    with pytest.raises(ValueError):
        v.values[0] = 5.0
    src = np.ones(7)
    w = JointVector(src)
    src[0] = 9.0
    assert w[0] == 1.0


def test_arithmetic_elementwise():
    a = JointVector(range(7))
    b = JointVector.full(2.0)
    assert (a + b) == JointVector([2, 3, 4, 5, 6, 7, 8])
    assert (a - b) == JointVector([-2, -1, 0, 1, 2, 3, 4])
    assert a * 0.5 == JointVector([0, 0.5, 1, 1.5, 2, 2.5, 3])
    assert 2 * a == a + a
    assert -a == a * -1


def test_scaling_overflow_is_caught():
    with pytest.raises(ConstructionError):
        JointVector.full(1e308) * 1e10


def test_same_stream_same_sequence():
    a, b = RngStream(42, 3), RngStream(42, 3)
    xs = [rng_next_uniform(a) for _ in range(1000)]
    ys = [rng_next_uniform(b) for _ in range(1000)]
    assert xs == ys


def test_distinct_stream_ids_differ():
    a, b = RngStream(1, 0), RngStream(1, 1)
    xs = [rng_next_uniform(a) for _ in range(1000)]
    ys = [rng_next_uniform(b) for _ in range(1000)]
    assert xs != ys


def test_uniform_range():
    s = RngStream(9, 9)
    xs = np.array([rng_next_uniform(s) for _ in range(5000)])
    assert xs.min() >= 0.0 and xs.max() < 1.0


def test_rng_known_values_pinned():
    # frozen from this implementation; guards against silent changes of the
    # stream construction (SeedSequence([seed, stream_id]) -> PCG64)
    expected = np.random.Generator(np.random.PCG64(np.random.SeedSequence([5, 2]))).random(3)
    s = RngStream(5, 2)
    assert [s.uniform() for _ in range(3)] == expected.tolist()


def test_derive_seed_deterministic_and_distinct():
    assert derive_seed(10, 0) == derive_seed(10, 0)
    seeds = {derive_seed(10, r) for r in range(100)}
    assert len(seeds) == 100
    assert derive_seed(10, 1, 2) != derive_seed(10, 2, 1)
    assert 0 <= derive_seed(2**64 - 1, 5) < 2**64


def test_packet_payload_arity():
    z = JointVector.zeros()
    ControlPacket(0, 0, (z, z), Direction.LEADER_TO_FOLLOWER)
    ControlPacket(0, 0, (z,), Direction.FOLLOWER_TO_LEADER)
    with pytest.raises(ArityError):
        ControlPacket(0, 0, (z,), Direction.LEADER_TO_FOLLOWER)
    with pytest.raises(ArityError):
        ControlPacket(0, 0, (z, z), Direction.FOLLOWER_TO_LEADER)
    with pytest.raises(ConstructionError):
        ControlPacket(-1, 0, (z,), Direction.FOLLOWER_TO_LEADER)


def test_time_conversions():
    assert seconds_to_us(1.25) == 1_250_000
    assert us_to_ms(1500) == 1.5
    assert DOF == 7
