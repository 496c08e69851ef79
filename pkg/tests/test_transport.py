import numpy as np
import pytest

from teleop_sim.core import ControlPacket, Direction, JointVector, RngStream
from teleop_sim.errors import ConfigError, SamplerError
from teleop_sim.transport import (
    DelaySampler, TransportConfig, draw_cycle_phase, preset, sample_delay, sample_timings, submit,
    time_to_cycle_boundary,
)

Z = JointVector.zeros()


def l2f(seq, t):
    return ControlPacket(seq, t, (Z, Z), Direction.LEADER_TO_FOLLOWER)


class TestSampler:
    def test_constant(self):
        s = DelaySampler.constant(500)
        r = RngStream(1, 0)
        assert all(sample_delay(s, r) == 500 for _ in range(100))

    def test_gamma_mean_law_of_large_numbers(self):
        s = DelaySampler.shifted_gamma(0, 1, 1000)
        r = RngStream(2024, 0)
        draws = np.array([sample_delay(s, r) for _ in range(100_000)])
        assert abs(draws.mean() - 1000) / 1000 < 0.02
        assert draws.min() >= 0

    def test_mixture_with_zero_prob_equals_base(self):
        base = DelaySampler.from_moments(300, 2900, 4000)
        mix = DelaySampler.mixture(base, 0.0, DelaySampler.constant(1_000_000))
        a, b = RngStream(5, 1), RngStream(5, 1)
        assert [sample_delay(base, a) for _ in range(2000)] == [sample_delay(mix, b) for _ in range(2000)]

    def test_mixture_with_certain_spike(self):
        mix = DelaySampler.mixture(DelaySampler.constant(10), 1.0, DelaySampler.constant(90))
        assert sample_delay(mix, RngStream(0, 0)) == 100

    @pytest.mark.parametrize("args", [(0, -1, 10), (0, 1, -10), (0, 0, 10), (-5, 1, 10)])
    def test_invalid_gamma(self, args):
        with pytest.raises(SamplerError):
            DelaySampler.shifted_gamma(*args)

    def test_invalid_family_and_prob(self):
        with pytest.raises(SamplerError):
            DelaySampler("lognormal")
        with pytest.raises(SamplerError):
            DelaySampler.mixture(DelaySampler.constant(1), 1.5, DelaySampler.constant(1))
        with pytest.raises(SamplerError):
            DelaySampler.constant(-1)

    def test_from_moments(self):
        s = DelaySampler.from_moments(50, 116, 127)
        assert s.mean_us == pytest.approx(116)
        assert np.sqrt(s.shape) * s.scale_us == pytest.approx(127)

    def test_draws_never_below_shift(self):
        s = DelaySampler.from_moments(200, 1260, 2370)
        r = RngStream(3, 3)
        assert min(sample_delay(s, r) for _ in range(5000)) >= 200


class TestSubmit:
    def test_gallop_wait_for_boundary(self):
        tc = TransportConfig("gallop", DelaySampler.constant(0), DelaySampler.constant(0), RngStream(0, 0),
                             cycle_us=50_000, cycle_phase_us=0)
        ev = submit(tc, l2f(0, 1000), 1000)
        assert ev.t_send == 49_000

    def test_gallop_boundary_exact_waits_zero(self):
        assert time_to_cycle_boundary(100_000, 50_000, 0) == 0
        assert time_to_cycle_boundary(100_001, 50_000, 0) == 49_999
        assert time_to_cycle_boundary(0, 50_000, 49_000) == 49_000

    def test_gallop_t_send_depends_only_on_phase(self):
        tc = preset("gallop", 11, 1)
        phase_sends = {}
        for k in range(200):
            now = k * 50_000 + (k % 4) * 1000
            ev = submit(tc, l2f(k, now), now)
            phase_sends.setdefault(now % tc.cycle_us, set()).add(ev.t_send)
        assert all(len(v) == 1 for v in phase_sends.values())
        assert len(phase_sends) == 4

    def test_wired_recv_at_least_shift(self):
        tc = preset("wired", 3, 1)
        assert tc.spike_prob == 0
        for k in range(500):
            ev = submit(tc, l2f(k, k * 50_000), k * 50_000)
            assert ev.t_recv - ev.blocked_us >= 200
            assert ev.t_send >= 50

    def test_in_order_clamp(self):
        # second packet would overtake the first; it is held back to the first's delivery time
        tc = TransportConfig("wired", DelaySampler.constant(0), DelaySampler.constant(0), RngStream(0, 0))
        slow = tc.replace(receive_path=DelaySampler.constant(80_000))
        first = submit(slow, l2f(0, 0), 0)
        slow.receive_path = DelaySampler.constant(1_000)
        second = submit(slow, l2f(1, 50_000), 50_000)
        assert first.deliver_at == 80_000
        assert second.deliver_at == 80_000
        assert second.blocked_us == 29_000
        assert second.deliver_at == second.packet.sent_at + second.t_send + second.t_recv

    def test_now_must_match_stamp(self):
        tc = preset("wired", 0)
        with pytest.raises(ValueError):
            submit(tc, l2f(0, 10), 20)

    @pytest.mark.parametrize("kind", ["wired", "wireless", "gallop"])
    def test_order_preserved(self, kind):
        tc = preset(kind, 99, 1)
        deliveries = []
        for k in range(3000):
            ev = submit(tc, l2f(k, k * 50_000), k * 50_000)
            assert ev.deliver_at == ev.packet.sent_at + ev.t_send + ev.t_recv
            assert ev.t_send >= 0 and ev.t_recv >= 0
            deliveries.append(ev.deliver_at)
        assert deliveries == sorted(deliveries)


class TestPresets:
    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            preset("udp", 1)

    def test_wired_send_mean(self):
        send, _ = sample_timings(preset("wired", 1), 30_000)
        assert send.mean() / 1000 == pytest.approx(0.116, rel=0.15)

    def test_wireless_tail(self):
        _, recv = sample_timings(preset("wireless", 1), 30_000)
        assert recv.max() > 400_000
        assert np.quantile(recv, 0.999) > 20 * np.median(recv)

    def test_gallop_recv_sigma(self):
        _, recv = sample_timings(preset("gallop", 1), 30_000)
        assert recv.std(ddof=1) / 1000 <= 1.1

    def test_gallop_phase_range(self):
        for seed in range(50):
            phase = draw_cycle_phase(RngStream(seed, 4))
            assert 48_500 <= phase <= 49_500

    @pytest.mark.parametrize("kind", ["wired", "wireless", "gallop"])
    def test_bitwise_reproducible(self, kind):
        a = sample_timings(preset(kind, 8), 2000)
        b = sample_timings(preset(kind, 8), 2000)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_effective_includes_blocking(self):
        _, raw = sample_timings(preset("wireless", 4), 5000)
        _, eff = sample_timings(preset("wireless", 4), 5000, effective=True)
        assert np.all(eff >= raw)
        assert eff.mean() > raw.mean()

    def test_invalid_config(self):
        r = RngStream(0, 0)
        c = DelaySampler.constant(1)
        with pytest.raises(ConfigError):
            TransportConfig("wireless", c, c, r, spike_prob=1.5, spike_delay=c)
        with pytest.raises(ConfigError):
            TransportConfig("wireless", c, c, r, spike_prob=0.1)
        with pytest.raises(ConfigError):
            TransportConfig("gallop", c, c, r, cycle_us=0)
