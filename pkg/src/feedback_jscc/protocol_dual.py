"""Closed-form analysis of the two-source protocol with joint detection."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import special as sps

from .errors import DomainError
from .lower_bounds import Regime
from .quantization import (
    LN2,
    cardinality_factor,
    distortion_terms_gaussian,
    distortion_terms_uniform,
)
from .special import p2_gaussian_variant, p2_pairwise, uncorrectable_bound


@dataclass(frozen=True)
class DualSchedule:
    """Energies of the two-source protocol.

    ``ed2`` is the total second-round data energy; each source sends half of
    it. Control energies ``ec11``/``ec12`` are per source.
    """

    ed11: float
    ed12: float
    ed2: float
    ec11: float
    ec12: float
    lam: float = 0.25
    n0: float = 1.0
    B: int = 4
    rho: float = 0.99
    theta: float = 1.0

    def __post_init__(self):
        if min(self.ed11, self.ed12, self.ed2, self.ec11, self.ec12) < 0:
            raise DomainError("energies must be nonnegative")
        if not 0 <= self.lam < 1:
            raise DomainError("lambda must lie in [0, 1)")
        if not self.n0 > 0:
            raise DomainError("n0 must be positive")
        if self.B < 2:
            raise DomainError("need B >= 2")
        if abs(self.rho) > 1:
            raise DomainError("|rho| must not exceed 1")
        if not self.theta > 0:
            raise DomainError("theta must be positive")

    @classmethod
    def split(cls, ed1: float, ed2: float, ec1: float, **kw) -> "DualSchedule":
        """Even split of each round's total energy between the two sources."""
        return cls(ed1 / 2, ed1 / 2, ed2, ec1 / 2, ec1 / 2, **kw)

    @property
    def ed1(self) -> float:
        return self.ed11 + self.ed12

    @property
    def ec1(self) -> float:
        return self.ec11 + self.ec12

    @property
    def root(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.rho**2))


def allocate_dual(ed1: float, mu: float, lam: float, regime: Regime = Regime.HIGH, **kw) -> DualSchedule:
    """Energy relations that balance the error exponents.

    HIGH: E_C1 = E_D2 / (1 - sqrt(lam))^2. LOW: E_C1 = E_D2 / (2 (sqrt(lam) - 1)^2).
    Both use E_D2 = (2 - mu) E_D1.
    """
    if not 0 < mu < 2:
        raise DomainError("mu must lie in (0, 2)")
    if not 0 <= lam < 1:
        raise DomainError("lambda must lie in [0, 1)")
    ed2 = (2.0 - mu) * ed1
    gap = (1.0 - math.sqrt(lam)) ** 2
    ec1 = ed2 / gap if regime is Regime.HIGH else ed2 / (2.0 * gap)
    return DualSchedule.split(ed1, ed2, ec1, lam=lam, **kw)


def default_theta(B: int, rho: float) -> float:
    """Low/high correlation boundary 2 sqrt(B ln2 / (1 - rho^2))."""
    r2 = 1.0 - rho * rho
    if r2 <= 0:
        return math.inf
    return 2.0 * math.sqrt(B * LN2 / r2)


@dataclass(frozen=True)
class FirstRoundProbs:
    """Joint first-round outcome probabilities and control-phase error rates."""

    p10: float  # only source 1 wrong
    p01: float  # only source 2 wrong
    p11: float  # both wrong
    p_ec1: float = 0.0
    p_ec2: float = 0.0
    p_ce1: float = 0.0
    p_ce2: float = 0.0

    @property
    def p00(self) -> float:
        return max(0.0, 1.0 - self.p10 - self.p01 - self.p11)


def dual_avg_energy(s: DualSchedule, probs: FirstRoundProbs) -> tuple[float, float]:
    """Average energy: (expectation, upper bound with detection probabilities set to 1)."""
    p = probs
    exact = (s.ed11 + s.ed12 + s.ec11 * p.p10 + s.ec12 * p.p01 + s.ec1 * p.p11
             + s.ed2 * (p.p10 * (1 - p.p_ec1) + p.p01 * (1 - p.p_ec2)
                        + p.p11 * (1 - p.p_ec1 * p.p_ec2) + p.p00 * (p.p_ce1 + p.p_ce2)))
    bound = (s.ed1 + 0.5 * s.ec1 * (p.p10 + p.p01) + s.ec1 * p.p11
             + s.ed2 * (p.p10 + p.p01 + p.p11 + p.p00 * (p.p_ce1 + p.p_ce2)))
    return exact, bound


@dataclass(frozen=True)
class DualErrorBreakdown:
    """Error probabilities split by cause.

    ``one_first``/``both_first``: first-round pairwise terms that need a
    missed NACK (multiplied once or twice by it); ``one_final``/``both_final``:
    errors surviving the second round.
    """

    p_ec: float
    one_first: float
    both_first: float
    one_final: float
    both_final: float

    @property
    def p_e1(self) -> float:
        return min(1.0, self.p_ec * self.one_first + self.one_final)

    @property
    def p_e2(self) -> float:
        return min(1.0, self.p_ec**2 * self.both_first + self.both_final)


def _uncorrectable(s: DualSchedule) -> float:
    # symmetric sources: per-source control energy
    return uncorrectable_bound(s.lam, s.ec11 / s.n0)


def dual_error_breakdown_uniform(s: DualSchedule) -> DualErrorBreakdown:
    n_near = cardinality_factor(s.B, s.root)
    n_theta = cardinality_factor(s.B, s.theta * s.root)
    M = 1 << s.B
    g1 = s.ed11 / s.n0
    g_one = (s.ed11 + s.ed2 / 2) / s.n0
    g_pair = s.ed1 / s.n0
    g_all = (s.ed1 + s.ed2) / s.n0
    return DualErrorBreakdown(
        p_ec=_uncorrectable(s),
        one_first=n_near * p2_pairwise(1, g1),
        both_first=n_near * M * p2_pairwise(2, g_pair),
        one_final=n_theta * p2_pairwise(2, g_one),
        both_final=n_theta * M * p2_pairwise(4, g_all),
    )


def dual_pe_uniform(s: DualSchedule) -> tuple[float, float]:
    """(one source wrong, both wrong) bounds for the uniform pair.

    SNR arguments are the cumulative data energies entering each pairwise
    comparison.
    """
    b = dual_error_breakdown_uniform(s)
    return b.p_e1, b.p_e2


def dual_error_breakdown_gaussian(s: DualSchedule) -> DualErrorBreakdown:
    n_theta = cardinality_factor(s.B, s.theta * s.root)
    M = 1 << s.B
    n0 = s.n0
    return DualErrorBreakdown(
        p_ec=_uncorrectable(s),
        one_first=n_theta * p2_gaussian_variant(1, s.ed1 / (2 * n0)),
        both_first=n_theta * M * p2_gaussian_variant(2, s.ed1 / n0),
        one_final=n_theta * p2_gaussian_variant(2, (s.ed1 + s.ed2) / (2 * n0)),
        both_final=n_theta * M * p2_gaussian_variant(4, (s.ed1 + s.ed2) / n0),
    )


def dual_pe_gaussian(s: DualSchedule) -> tuple[float, float]:
    """(one source wrong, both wrong) bounds for the Gaussian pair."""
    b = dual_error_breakdown_gaussian(s)
    return b.p_e1, b.p_e2


def appendix_total_pe(p_ec: float, pe11: float, pe21: float, p_e2: float) -> float:
    """P_ec * P_{e,1,1} + P_ec^2 * P_{e,2,1} + Pr(E_2), clamped to [0, 1]."""
    return min(1.0, max(0.0, p_ec * pe11 + p_ec**2 * pe21 + p_e2))


def beta_factor(ed1_over_n0: float, rho: float) -> float:
    x = math.exp(-ed1_over_n0 / 2.0)
    num = 96.0 + 3.0 / rho**2 * x
    den = 14.0 + (0.5 * x + 2.0 * rho**2) ** 2
    return (num / den) ** (2.0 / 3.0)


def alpha_factor(ed1_over_n0: float) -> float:
    return (4.0 * math.sqrt(ed1_over_n0 / math.pi) + 16.0 * ed1_over_n0) ** (-2.0 / 3.0)


def is_high_correlation_uniform(s: DualSchedule) -> bool:
    return s.root < s.theta * 2.0 ** (-s.B)


def dual_distortion_uniform(s: DualSchedule, asymptotic: bool = False, mu: float = 1.0) -> float:
    """Distortion bound for the uniform pair, summed over both sources.

    The asymptotic form needs the slack ``mu`` that generated the schedule.
    """
    if asymptotic:
        x = s.ed1 / s.n0
        return math.exp(-x * (1.0 - mu / 3.0)) * beta_factor(x, s.rho)
    terms = distortion_terms_uniform(s.B, s.rho)
    p_e1, p_e2 = dual_pe_uniform(s)
    return terms.d_q + terms.d_e1 * p_e1 + terms.d_e2 * p_e2


def incompatibility_probability(s: DualSchedule, bound: bool = True) -> float:
    """Pr(|U2'| > theta sqrt(1-rho^2)): exponential bound or exact Gaussian tail."""
    x = s.theta * s.root
    if bound:
        return math.exp(-x * x / 2.0)
    return float(sps.erfc(x / math.sqrt(2.0)))


def lowcorr_exponents(mu: float) -> tuple[float, float, float]:
    """Decay rates (per E_D1/N0) of the three low-correlation terms."""
    return ((1.0 - mu / 4.0) / 2.0, (1.0 - mu / 3.0) / 2.0, (3.0 - mu) / 4.0)


def dual_distortion_gaussian(s: DualSchedule, regime: Regime = Regime.HIGH,
                             asymptotic: bool = False, mu: float = 1.0) -> float:
    """Distortion bound for the Gaussian pair, summed over both sources.

    Asymptotic HIGH keeps the leading term with its closed-form prefactor. The
    LOW prefactors are not available in closed form, so the asymptotic LOW
    value uses unit prefactors and only its decay is meaningful.
    """
    if regime not in (Regime.HIGH, Regime.LOW):
        raise DomainError("regime must be HIGH or LOW")
    x = s.ed1 / s.n0
    if asymptotic:
        if regime is Regime.HIGH:
            return math.exp(-x * (1.0 - mu / 3.0)) * alpha_factor(x)
        return sum(math.exp(-x * r) for r in lowcorr_exponents(mu))
    terms = distortion_terms_gaussian(s.B, s.rho, s.theta)
    p_e1, p_e2 = dual_pe_gaussian(s)
    p_inc = incompatibility_probability(s, bound=True)
    return (terms.d_q + terms.d_ec1 * p_e1 + terms.d_e2 * p_e2
            + p_inc * (terms.d_eic1 + terms.d_e2 * p_e2))
