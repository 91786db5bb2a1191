import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from feedback_jscc.errors import DomainError, NonConvergenceError
from feedback_jscc.special import (
    Quadrature,
    bessel_i,
    log_bessel_i,
    marcum_q1,
    marcum_q1_complement,
    p2_gaussian_variant,
    p2_pairwise,
    rician_pm,
    uncorrectable_bound,
)

# Reference values from 60-digit mpmath: Marcum Q1 from its Neumann series in
# I_k(ab), Bessel I from the ascending series, P2 by integrating the
# noncentral chi-square density against the gamma tail, and the L=1 M-ary
# probability by inclusion-exclusion over the wrong branches.
MARCUM_TABLE = [
    (1.0, 2.0, 0.26901206003591, 0.73098793996409),
    (2.0, 1.0, 0.918107696369406, 0.081892303630593996),
    (3.0, 3.0, 0.56747976229086151, 0.43252023770913849),
    (0.5, 4.0, 0.00073703530680494838, 0.99926296469319505),
    (5.0, 2.0, 0.99919927036288579, 0.00080072963711420814),
    (10.0, 12.0, 0.025329474297941418, 0.97467052570205858),
    (4.0, 0.5, 0.99993782390866671, 6.2176091333292319e-5),
    (20.0, 5.0, 1.0, 1.8255946678887757e-51),
    (30.0, 3.0, 1.0, 2.3255705964540079e-161),
    (0.01, 0.02, 0.99980002999641701, 0.00019997000358298754),
    (6.0, 9.0, 0.0016827218679072956, 0.9983172781320927),
]
BESSEL_TABLE = [
    (0, 0.5, 1.0634833707413235),
    (1, 3.0, 3.9533702174026094),
    (2, 10.0, 2281.5189677260035),
    (3, 25.5, 7.874267416501606e9),
    (0, 20.0, 4.3558282559553533e7),
    (5, 1.0, 0.00027146315595697188),
    (15, 7.0, 0.00023438782472236975),
]
P2_TABLE = [
    (1, 1.0, 0.30326532985631671),
    (1, 5.0, 0.041042499311949398),
    (1, 12.0, 0.0012393760883331792),
    (1, 30.0, 1.5295116025091289e-7),
    (2, 1.0, 0.3411734960883563),
    (2, 5.0, 0.066694061381917771),
    (2, 12.0, 0.003098440220832948),
    (2, 30.0, 7.2651801119183625e-7),
    (3, 1.0, 0.36249683959387857),
    (3, 5.0, 0.087535955563767075),
    (3, 12.0, 0.0054222703864576591),
    (3, 30.0, 2.0887392821765292e-6),
    (4, 1.0, 0.37681112111378935),
    (4, 5.0, 0.10523820542976087),
    (4, 12.0, 0.0080946750769260767),
    (4, 30.0, 4.6877140755025882e-6),
    (8, 1.0, 0.40755849445469061),
    (8, 5.0, 0.1573229941248562),
    (8, 12.0, 0.020801240963858003),
    (8, 30.0, 3.8101122587135785e-5),
]
PM_L1_TABLE = [
    (2, 5.0, 0.3, 0.10510841176326923),
    (4, 10.0, 0.0, 0.0089725577898253507),
    (16, 8.0, 0.0, 0.072300647584990123),
    (16, 20.0, 0.5, 0.11868435402024734),
    (64, 30.0, 0.1, 0.010529264777571837),
    (256, 40.0, 0.0, 2.4827971110370372e-7),
    (8, 100.0, 0.9, 0.025136105618591525),
    (32, 15.0, 1.0, 0.2201439313969543),
    (4, 0.0, 0.0, 0.75),
]


class TestBessel:
    def test_origin(self):
        assert bessel_i(0, 0.0) == 1.0
        assert bessel_i(3, 0.0) == 0.0

    @pytest.mark.parametrize("n,x,ref", BESSEL_TABLE)
    def test_series_oracle(self, n, x, ref):
        assert bessel_i(n, x) == pytest.approx(ref, rel=1e-12)

    def test_fifty_term_series(self):
        series = sum((1.0) ** (2 * k + 1) / (math.factorial(k) * math.factorial(k + 1)) for k in range(50))
        assert abs(bessel_i(1, 2.0) - series) < 1e-10

    def test_log_form_beyond_double_range(self):
        assert log_bessel_i(0, 1000.0) == pytest.approx(1000.0 - 0.5 * math.log(2 * math.pi * 1000.0), rel=1e-6)
        with pytest.raises(OverflowError):
            bessel_i(0, 1000.0)

    def test_negative_argument(self):
        with pytest.raises(DomainError):
            bessel_i(0, -1.0)


class TestMarcum:
    @pytest.mark.parametrize("a,b,q,qc", MARCUM_TABLE)
    def test_series_oracle(self, a, b, q, qc):
        assert marcum_q1(a, b) == pytest.approx(q, rel=1e-10, abs=1e-14)
        assert marcum_q1_complement(a, b) == pytest.approx(qc, rel=1e-9, abs=1e-300)

    @pytest.mark.parametrize("a", [0.0, 0.3, 2.0, 15.0])
    def test_b_zero(self, a):
        assert marcum_q1(a, 0.0) == 1.0

    @pytest.mark.parametrize("b", [0.1, 1.0, 3.0, 7.0])
    def test_rayleigh_tail(self, b):
        assert abs(marcum_q1(0.0, b) - math.exp(-b * b / 2)) < 1e-9

    def test_monotone_on_grid(self):
        grid = np.linspace(0.0, 8.0, 20)
        table = np.array([[marcum_q1(a, b) for b in grid] for a in grid])
        assert np.all(np.diff(table, axis=1) <= 1e-12)  # non-increasing in b
        assert np.all(np.diff(table, axis=0) >= -1e-12)  # non-decreasing in a

    @given(st.floats(0, 20), st.floats(0, 20))
    def test_parts_sum_to_one(self, a, b):
        assert marcum_q1(a, b) + marcum_q1_complement(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            marcum_q1(-1.0, 1.0)


class TestUncorrectableBound:
    def test_values(self):
        assert uncorrectable_bound(0.0, 0.0) == 0.5
        assert uncorrectable_bound(0.25, 4.0) == pytest.approx(0.5 * math.exp(-1.0), rel=1e-14)

    def test_dominates_exact(self):
        assert uncorrectable_bound(0.25, 4.0) >= marcum_q1_complement(math.sqrt(8), math.sqrt(2))

    @given(st.floats(0, 0.99), st.floats(0, 60))
    def test_dominates_exact_everywhere(self, lam, x):
        exact = marcum_q1_complement(math.sqrt(2 * x), math.sqrt(2 * lam * x))
        assert exact <= uncorrectable_bound(lam, x) * (1 + 1e-9) + 1e-15

    def test_lambda_range(self):
        with pytest.raises(DomainError):
            uncorrectable_bound(1.0, 1.0)


class TestPairwise:
    @pytest.mark.parametrize("L,g,ref", P2_TABLE)
    def test_chi_square_oracle(self, L, g, ref):
        assert p2_pairwise(L, g) == pytest.approx(ref, rel=1e-12)

    def test_closed_forms(self):
        assert p2_pairwise(1, 0.0) == 0.5
        assert p2_pairwise(2, 0.0) == 0.5
        for g in (0.5, 2.0, 9.0):
            assert p2_pairwise(1, g) == pytest.approx(0.5 * math.exp(-g / 2), rel=1e-15)
            assert p2_pairwise(2, g) == pytest.approx(math.exp(-g / 2) * (4 + g / 2) / 8, rel=1e-15)

    def test_two_round_monte_carlo(self):
        rng = np.random.default_rng(11)
        n, g = 1_000_000, 2.0
        e = g / 2  # per-round energy, N0 = 1

        def cn(shape):
            return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)

        right = np.abs(math.sqrt(e) + cn((n, 2))) ** 2
        wrong = np.abs(cn((n, 2))) ** 2
        p_hat = np.mean(right.sum(axis=1) < wrong.sum(axis=1))
        sigma = math.sqrt(p_hat * (1 - p_hat) / n)
        assert abs(p_hat - p2_pairwise(2, g)) <= 3 * sigma

    def test_gaussian_variant(self):
        assert p2_gaussian_variant(1, 0.0) == 0.5
        assert p2_gaussian_variant(1, 1.0) == pytest.approx(0.5 * math.exp(-1.0), rel=1e-15)
        assert p2_gaussian_variant(2, 2.0) == pytest.approx(p2_pairwise(2, 4.0), rel=1e-15)

    @given(st.integers(1, 16), st.floats(0, 200), st.floats(0, 50))
    def test_range_and_monotone(self, L, g, dg):
        a, b = p2_pairwise(L, g), p2_pairwise(L, g + dg)
        assert 0.0 <= b <= a <= 1.0
        if g < 100:
            assert a > 0

    def test_diversity_limit(self):
        with pytest.raises(OverflowError):
            p2_pairwise(17, 1.0)


class TestRicianPm:
    @pytest.mark.parametrize("M,g,a,ref", PM_L1_TABLE)
    def test_inclusion_exclusion_oracle(self, M, g, a, ref):
        assert rician_pm(M, 1, g, a) == pytest.approx(ref, rel=1e-8, abs=1e-12)

    def test_tiny_probability_with_tight_tolerance(self):
        q = Quadrature(abs_tol=1e-300)
        assert rician_pm(64, 1, 200.0, 0.0, q) == pytest.approx(1.1718239324464825e-42, rel=1e-8)

    @pytest.mark.parametrize("g", [0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20])
    def test_binary_awgn(self, g):
        assert abs(rician_pm(2, 1, float(g), 0.0) - 0.5 * math.exp(-g / 2)) < 1e-6

    @pytest.mark.parametrize("L", [1, 2, 4])
    def test_binary_matches_pairwise(self, L):
        for g in (1.0, 6.0, 25.0):
            assert rician_pm(2, L, g, 0.0) == pytest.approx(p2_pairwise(L, g), rel=1e-8, abs=1e-13)

    @pytest.mark.parametrize("M,L,a", [(2, 1, 0.0), (8, 2, 0.3), (64, 3, 1.0), (16, 4, 0.7)])
    def test_zero_snr(self, M, L, a):
        assert rician_pm(M, L, 0.0, a) == pytest.approx(1 - 1 / M, abs=1e-9)

    def test_monte_carlo_rician(self):
        rng = np.random.default_rng(5)
        n, M, g, a = 1_000_000, 4, 10.0, 0.5

        def cn(shape):
            return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)

        y = cn((n, M))
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
        y[:, 0] += math.sqrt(g) * (math.sqrt(1 - a) * phase + math.sqrt(a) * cn(n))
        p_hat = np.mean(np.argmax(np.abs(y) ** 2, axis=1) != 0)
        sigma = math.sqrt(p_hat * (1 - p_hat) / n)
        assert abs(p_hat - rician_pm(M, 1, g, a)) <= 3 * sigma

    def test_monte_carlo_two_independent_fades(self):
        rng = np.random.default_rng(6)
        n, M, g, a = 400_000, 16, 40.0, 0.5

        def cn(shape):
            return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)

        stat = np.zeros((n, M))
        for _ in range(2):
            y = cn((n, M))
            phase = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
            y[:, 0] += math.sqrt(g / 2) * (math.sqrt(1 - a) * phase + math.sqrt(a) * cn(n))
            stat += np.abs(y) ** 2
        p_hat = np.mean(np.argmax(stat, axis=1) != 0)
        sigma = math.sqrt(p_hat * (1 - p_hat) / n)
        assert abs(p_hat - rician_pm(M, 2, g, a, per_round=True)) <= 3 * sigma
        # the shared-variance form is optimistic here
        assert rician_pm(M, 2, g, a) < p_hat - 10 * sigma

    @given(st.sampled_from([2, 4, 16, 64]), st.integers(1, 3), st.floats(0, 60), st.floats(0.5, 20),
           st.floats(0, 1))
    def test_monotone(self, M, L, g, dg, a):
        p = rician_pm(M, L, g, a)
        assert rician_pm(M, L, g + dg, a) <= p + 1e-9
        assert rician_pm(2 * M, L, g, a) >= p - 1e-9

    def test_validation(self):
        with pytest.raises(DomainError):
            rician_pm(3, 1, 1.0, 0.0)
        with pytest.raises(DomainError):
            rician_pm(4, 1, 1.0, 1.5)
        with pytest.raises(DomainError):
            Quadrature(rel_tol=0.0)

    def test_reports_nonconvergence(self):
        with pytest.raises(NonConvergenceError):
            rician_pm(1024, 4, 40.0, 0.2, Quadrature(max_subdivisions=1, rel_tol=1e-14, abs_tol=1e-300))
