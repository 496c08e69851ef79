import math

import numpy as np
import pytest

from teleop_sim.core import JointVector
from teleop_sim.dynamics import (
    DEFAULT_TRAJECTORY, JOINT_LIMIT, ArmModel, ArmState, ControlGains, OperatorTrajectory, Waypoint,
    external_torque_estimate, follower_torque, leader_torque, operator_reference, pseudo_expert_trajectory,
    reference_series, step_arm,
)
from teleop_sim.core import RngStream
from teleop_sim.errors import ConfigError, ConstructionError, GainError, IntegrationError

J = JointVector


def e(i, x):
    v = [0.0] * 7
    v[i] = x
    return J(v)


class TestLeaderTorque:
    def test_zero_input(self):
        assert leader_torque(0.3, J.zeros()) == J.zeros()

    def test_uniform_scaling(self):
        assert leader_torque(0.5, J.full(1.0)) == J.full(0.5)

    def test_elementwise(self):
        out = leader_torque(0.3, J([2, -4, 0, 1, 3, -1, 5]))
        np.testing.assert_allclose(out.values, [0.6, -1.2, 0, 0.3, 0.9, -0.3, 1.5], rtol=1e-15)

    @pytest.mark.parametrize("k", [0.0, 1.0, -0.1, 1.5])
    def test_k_outside_open_interval(self, k):
        with pytest.raises(GainError):
            leader_torque(k, J.zeros())


class TestFollowerTorque:
    gains = ControlGains(P=np.full(7, 50.0), D=np.full(7, 5.0))

    def test_coincident_states(self):
        s = ArmState(J([0.1] * 7), J([0.2] * 7))
        assert follower_torque(self.gains, s, s) == J.zeros()

    def test_position_error(self):
        out = follower_torque(self.gains, ArmState(e(0, 0.1), J.zeros()), ArmState.rest())
        np.testing.assert_allclose(out.values, [5, 0, 0, 0, 0, 0, 0], rtol=1e-12)

    def test_velocity_error(self):
        out = follower_torque(self.gains, ArmState(J.zeros(), e(1, 0.2)), ArmState.rest())
        np.testing.assert_allclose(out.values, [0, 1, 0, 0, 0, 0, 0], rtol=1e-12)

    def test_sign_drives_follower_toward_leader(self):
        out = follower_torque(self.gains, ArmState(e(3, 1.0), J.zeros()), ArmState.rest())
        assert out[3] > 0


class TestGains:
    def test_defaults(self):
        g = ControlGains()
        assert g.P[0] == 50.0 and g.D[0] == 14.1 and g.K == 0.3

    @pytest.mark.parametrize("kw", [{"P": np.zeros(7)}, {"D": -np.ones(7)}, {"K": 1.0}])
    def test_invalid(self, kw):
        with pytest.raises(GainError):
            ControlGains(**kw)

    def test_arm_model_rejects_zero_inertia(self):
        with pytest.raises(ConfigError):
            ArmModel(inertia=np.zeros(7))


class TestStepArm:
    def test_equilibrium(self):
        s = ArmState.rest([0.3] * 7)
        assert step_arm(ArmModel(), s, J.zeros()) == s

    def test_one_step_hand_integration(self):
        m = ArmModel(inertia=np.ones(7), damping=np.zeros(7))
        out = step_arm(m, ArmState.rest(), e(0, 1.0), 1000)
        assert out.qdot[0] == pytest.approx(0.001, rel=1e-15)
        assert out.q[0] == pytest.approx(1e-6, rel=1e-15)
        assert np.all(out.q.values[1:] == 0)

    def test_damping_one_step(self):
        m = ArmModel(inertia=np.ones(7), damping=np.ones(7))
        out = step_arm(m, ArmState(J.zeros(), e(0, 1.0)), J.zeros(), 1000)
        assert out.qdot[0] == pytest.approx(0.999, rel=1e-15)

    def test_nonfinite_torque(self):
        with pytest.raises((IntegrationError, ConstructionError)):
            step_arm(ArmModel(), ArmState.rest(), np.array([math.nan] + [0.0] * 6))

    def test_joint_limit_clamp_zeroes_velocity(self):
        s = ArmState(J([JOINT_LIMIT - 1e-4] * 7), J([1.0] * 7))
        out = step_arm(ArmModel(), s, J.zeros())
        assert np.all(out.q.values == JOINT_LIMIT)
        assert np.all(out.qdot.values == 0.0)
        s = ArmState(J([-JOINT_LIMIT + 1e-4] * 7), J([-1.0] * 7))
        out = step_arm(ArmModel(), s, J.zeros())
        assert np.all(out.q.values == -JOINT_LIMIT)

    def test_kinetic_energy_nonincreasing_with_damping(self):
        m = ArmModel()
        s = ArmState(J.zeros(), J([1, -2, 0.5, 3, -1, 0.1, 2]))
        ke = s.kinetic_energy(m)
        for _ in range(2000):
            s = step_arm(m, s, J.zeros())
            new = s.kinetic_energy(m)
            assert new <= ke
            ke = new


class TestExternalTorque:
    def test_free_motion(self):
        assert external_torque_estimate(ControlGains(), ArmState.rest(), J.zeros()) == J.zeros()

    def test_pass_through(self):
        c = J([0, 0, 0, 1.5, 0, 0, 0])
        assert external_torque_estimate(ControlGains(), ArmState.rest(), c) == c

    def test_nonfinite_contact(self):
        with pytest.raises(ConstructionError):
            external_torque_estimate(ControlGains(), ArmState.rest(), [0, 0, 0, math.inf, 0, 0, 0])


class TestOperatorReference:
    def test_zero_amplitude(self):
        traj = OperatorTrajectory.sinusoidal(np.zeros(7), np.full(7, 0.3))
        for t in (0, 123_456, 29_000_000):
            r = operator_reference(traj, t)
            assert r.q == J.zeros() and r.qdot == J.zeros()

    def test_analytic_t0(self):
        traj = OperatorTrajectory.sinusoidal([0.5] + [0] * 6, [0.2] * 7)
        r = operator_reference(traj, 0)
        assert r.q[0] == 0.0
        assert r.qdot[0] == pytest.approx(0.5 * 2 * math.pi * 0.2, rel=1e-14)
        assert r.qdot[0] == pytest.approx(0.6283, abs=1e-4)

    def test_analytic_quarter_period(self):
        traj = OperatorTrajectory.sinusoidal([0.5] + [0] * 6, [0.2] * 7)
        assert operator_reference(traj, 1_250_000).q[0] == pytest.approx(0.5, rel=1e-14)

    def test_velocity_is_derivative(self):
        h = 1e-6
        for traj in (DEFAULT_TRAJECTORY, _waypoints()):
            q0, qd = reference_series(traj, np.array([2_300_000]))
            qp, _ = reference_series(traj, np.array([2_300_000 + 1]))
            qm, _ = reference_series(traj, np.array([2_300_000 - 1]))
            np.testing.assert_allclose((qp - qm) / (2 * h), qd, atol=1e-6)

    def test_waypoints_continuous_and_reach_targets(self):
        traj = _waypoints()
        t = np.arange(0, 6_000_001, 1000)
        q, qd = reference_series(traj, t)
        assert np.max(np.abs(np.diff(q, axis=0))) < 1e-2
        assert np.max(np.abs(np.diff(qd, axis=0))) < 1e-2
        np.testing.assert_allclose(q[0], [0.4] * 7)
        np.testing.assert_allclose(q[1000], [0.4] * 7)  # end of the initial hold
        np.testing.assert_allclose(q[2000], [0.1] * 7)  # midpoint of the move
        np.testing.assert_allclose(q[3000:], np.full((3001, 7), -0.2))
        assert np.all(qd[3000:] == 0.0)

    def test_pseudo_expert_draws_are_seeded(self):
        a = pseudo_expert_trajectory(RngStream(3, 3))
        b = pseudo_expert_trajectory(RngStream(3, 3))
        c = pseudo_expert_trajectory(RngStream(4, 3))
        np.testing.assert_array_equal(a.amplitude, b.amplitude)
        assert not np.array_equal(a.amplitude, c.amplitude)
        assert np.all((a.amplitude >= 0.2) & (a.amplitude <= 0.6))
        assert np.all((a.frequency >= 0.1) & (a.frequency <= 0.4))


def _waypoints():
    return OperatorTrajectory(kind="waypoint", waypoints=(
        Waypoint(J([0.4] * 7), move_s=1.5, hold_s=1.0),
        Waypoint(J([-0.2] * 7), move_s=2.0, hold_s=1.5),
    ))
