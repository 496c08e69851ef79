import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.stats

from teleop_sim.errors import ArityError, DegenerateError, InsufficientDataError, ShapeError
from teleop_sim.stats import (
    PairedData, _signed_rank_parts, bonferroni, compare_conditions, enumeration_p, exact_p_counts,
    friedman, friedman_statistic, ks_normality, report_csv_rows, report_text, wilcoxon_signed_rank,
)


class TestKS:
    def test_normal_draws_mostly_pass(self):
        passed = 0
        for rep in range(100):
            x = np.random.default_rng([2024, rep]).normal(3.0, 2.0, 10_000)
            passed += ks_normality(x).p_value > 0.05
        assert passed >= 95

    def test_exponential_rejected(self):
        x = np.random.default_rng(1).exponential(1.0, 10_000)
        r = ks_normality(x)
        assert r.p_value < 0.001 and r.significant

    def test_constant_sample(self):
        with pytest.raises(DegenerateError):
            ks_normality([4.2] * 20)

    def test_too_few(self):
        with pytest.raises(InsufficientDataError):
            ks_normality([1, 2, 3, 4])

    def test_statistic_matches_direct_computation(self, rng):
        x = rng.normal(size=37)
        m, s = x.mean(), x.std(ddof=1)
        xs = np.sort(x)
        cdf = np.array([0.5 * math.erfc(-(v - m) / (s * math.sqrt(2))) for v in xs])
        i = np.arange(1, 38)
        d = max(np.max(i / 37 - cdf), np.max(cdf - (i - 1) / 37))
        assert ks_normality(x).statistic == pytest.approx(d, rel=1e-12)


class TestFriedman:
    @pytest.mark.parametrize("n", [5, 15, 30])
    def test_perfect_ordering(self, n):
        values = np.tile([1.0, 2.0, 3.0], (n, 1)) + np.arange(n)[:, None] * 10
        assert friedman_statistic(values) == Fraction(2 * n)
        r = friedman(PairedData(["a", "b", "c"], values))
        assert r.statistic == 2 * n
        if n == 15:
            assert r.p_value < 0.001

    def test_all_identical(self):
        r = friedman(PairedData(["a", "b", "c"], np.ones((10, 3))))
        assert r.statistic == 0 and r.p_value == 1.0 and not r.significant

    def test_matches_scipy_with_ties(self, rng):
        x = rng.integers(0, 4, size=(12, 4)).astype(float)
        ours = friedman(PairedData(list("abcd"), x))
        ref = scipy.stats.friedmanchisquare(*x.T)
        assert ours.statistic == pytest.approx(ref.statistic, rel=1e-12)
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-10)

    def test_monotone_transform_invariance(self, rng):
        x = rng.normal(size=(15, 3))
        a = friedman_statistic(x)
        assert friedman_statistic(np.exp(3 * x) + 7) == a

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            PairedData(["a", "b"], np.ones((4, 3)))
        with pytest.raises(ShapeError):
            PairedData(["a", "b"], np.array([[1.0, np.nan], [2.0, 3.0]]))
        with pytest.raises(InsufficientDataError):
            friedman(PairedData(["a", "b"], np.ones((1, 2))))


def _fixture_suite():
    """50 paired datasets, n in 5..10, with ties and zero differences mixed in
    (every case keeps at least 5 nonzero differences)."""
    out = []
    for i in range(50):
        g = np.random.default_rng([7, i])
        n = 5 + i % 6
        a = g.normal(size=n)
        tied = i % 3 == 0 and n >= 7
        if tied:
            a = np.round(a, 1)
        b = a - g.normal(0.4 * (i % 4), 1.0, size=n)
        if tied:
            b = np.round(b, 1)
        if i % 5 == 0 and n >= 6:
            b[0] = a[0]
        out.append((a, b))
    return out


class TestWilcoxon:
    def test_identical_samples(self):
        with pytest.raises(DegenerateError):
            wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])

    def test_all_positive_six(self):
        r = wilcoxon_signed_rank([1, 2, 3, 4, 5, 6], [0] * 6)
        assert r.p_value == 2 / 64 == 0.03125
        assert r.n == 6

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 2, 3, 4])

    def test_too_few_nonzero(self):
        with pytest.raises(InsufficientDataError):
            wilcoxon_signed_rank([1, 2, 3, 4, 5, 6], [1, 2, 0, 0, 0, 0])

    @pytest.mark.parametrize("case", range(50))
    def test_fast_path_equals_enumeration(self, case):
        a, b = _fixture_suite()[case]
        d, ranks2 = _signed_rank_parts(a, b)
        wp = int(ranks2[d > 0].sum())
        w2 = min(wp, int(ranks2.sum()) - wp)
        assert exact_p_counts(ranks2, w2) == enumeration_p(ranks2, w2)
        assert wilcoxon_signed_rank(a, b).p_value == enumeration_p(ranks2, w2)

    def test_enumeration_oracle_by_hand(self):
        # doubled ranks 2,4,6: 8 sign patterns; W+ in {0,1,2,3,3,4,5,6}; W = 0 hits two of them
        assert enumeration_p([2, 4, 6], 0) == 2 / 8
        assert enumeration_p([2, 4, 6], 2) == 4 / 8

    def test_exact_matches_scipy(self, rng):
        for n in (6, 9, 12):
            a, b = rng.normal(size=n), rng.normal(0.5, 1, size=n)
            ref = scipy.stats.wilcoxon(a, b, method="exact")
            assert wilcoxon_signed_rank(a, b).p_value == pytest.approx(ref.pvalue, rel=1e-12)

    def test_common_shift_invariance(self, rng):
        a, b = rng.normal(size=20), rng.normal(size=20)
        assert wilcoxon_signed_rank(a, b).p_value == wilcoxon_signed_rank(a + 3.0, b + 3.0).p_value

    def test_z_sign(self):
        up = wilcoxon_signed_rank(np.arange(20.0) + 1, np.zeros(20))
        assert up.statistic > 0 and up.method == "normal"
        assert wilcoxon_signed_rank(np.zeros(20), np.arange(20.0) + 1).statistic == -up.statistic

    def test_n40_dp_matches_enumeration_on_size12_subsets(self):
        g = np.random.default_rng(40)
        a = g.normal(size=40)
        b = a + g.normal(1.0, 1.0, size=40)
        for _ in range(20):
            idx = g.choice(40, 12, replace=False)
            d, ranks2 = _signed_rank_parts(b[idx], a[idx])
            wp = int(ranks2[d > 0].sum())
            w2 = min(wp, int(ranks2.sum()) - wp)
            assert exact_p_counts(ranks2, w2) == enumeration_p(ranks2, w2)

    def test_n40_normal_approximation_same_decision_at_one_sigma(self):
        g = np.random.default_rng(40)
        a = g.normal(size=40)
        b = a + g.normal(1.0, 1.0, size=40)
        approx = wilcoxon_signed_rank(b, a, 0.05)
        exact = wilcoxon_signed_rank(b, a, 0.05, exact_max_n=40)
        assert approx.method == "normal" and exact.method == "exact"
        assert approx.significant and exact.significant

    def test_n40_normal_approximation_within_10pct_at_moderate_p(self):
        checked = 0
        for seed in range(60):
            g = np.random.default_rng(seed)
            a = g.normal(size=40)
            b = a + g.normal(0.2, 1.0, size=40)
            exact = wilcoxon_signed_rank(b, a, exact_max_n=40).p_value
            if 0.01 <= exact <= 0.5:
                approx = wilcoxon_signed_rank(b, a).p_value
                assert abs(approx - exact) / exact < 0.10
                checked += 1
        assert checked >= 20


class TestBonferroni:
    def test_values(self):
        assert round(bonferroni(0.05, 3), 4) == 0.0167
        assert bonferroni(0.05, 1) == 0.05
        assert bonferroni(0.01, 5) == pytest.approx(0.002, rel=1e-15)

    def test_product(self):
        for m in range(1, 30):
            assert bonferroni(0.05, m) * m == pytest.approx(0.05, rel=1e-15)

    def test_invalid(self):
        with pytest.raises(ArityError):
            bonferroni(0.05, 0)
        with pytest.raises(ValueError):
            bonferroni(0.0, 3)


class TestCompareConditions:
    def test_null_case(self, rng):
        col = rng.normal(size=15)
        rep = compare_conditions(PairedData(["a", "b", "c"], np.column_stack([col, col, col])))
        [f] = rep.by_test("friedman")
        assert f.statistic == 0 and not f.significant
        assert not any(r.significant for r in rep.by_test("wilcoxon"))

    def test_shifted_fixture(self, rng):
        A = rng.normal(size=15)
        C = A + rng.normal(0, 1e-3, size=15)
        rep = compare_conditions(PairedData(["A", "B", "C"], np.column_stack([A, A + 10, C])))
        assert rep.by_test("friedman")[0].significant
        sig = {(r.condition_a, r.condition_b) for r in rep.by_test("wilcoxon") if r.significant}
        assert sig == {("A", "B"), ("B", "C")}
        assert all(r.alpha_used == pytest.approx(0.05 / 3) for r in rep.by_test("wilcoxon"))

    def test_order_and_csv(self, rng):
        rep = compare_conditions(PairedData(["x", "y"], rng.normal(size=(8, 2))), metric="epsilon")
        assert [r.test for r in rep.rows] == ["ks_normality", "ks_normality", "friedman", "wilcoxon"]
        rows = report_csv_rows(rep)
        assert rows[-1][:3] == ["wilcoxon", "x", "y"] and rows[-1][5] == "0.0500"

    def test_text_header(self, rng):
        rep = compare_conditions(PairedData(["a", "b", "c"], rng.normal(size=(15, 3))), metric="epsilon")
        text = report_text({"epsilon": rep})
        assert "0.0167" in text.splitlines()[0]

    def test_substage_errors_are_recorded(self):
        x = np.column_stack([np.ones(6), np.ones(6) * 2, np.arange(6.0)])
        rep = compare_conditions(PairedData(["a", "b", "c"], x))
        ks = rep.by_test("ks_normality")
        assert ks[0].method == "skipped" and "ks stage" in ks[0].note
        assert len(rep.by_test("wilcoxon")) == 3

    def test_needs_two_conditions(self):
        with pytest.raises(ShapeError):
            compare_conditions(PairedData(["a"], np.ones((5, 1))))
