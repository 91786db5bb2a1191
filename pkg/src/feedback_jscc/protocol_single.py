"""Closed-form analysis of the single-source retransmission protocol.

Each round sends one of 2^B orthogonal codewords with energy ``ed[i]``; after
every round except the last the encoder signals NACK with energy ``ec[i]`` when
the receiver's decision is wrong, and the receiver declares an error when the
control statistic exceeds ``lam * ec[i]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DomainError
from .special import marcum_q1_complement, p2_pairwise, rician_pm, uncorrectable_bound

DATA_ERROR_DISTORTION = 2.0


@dataclass(frozen=True)
class EnergySchedule:
    """Per-round energies in the same units as ``n0``."""

    ed: tuple[float, ...]
    ec: tuple[float, ...] = ()
    lam: float = 0.25
    n0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "ed", tuple(float(x) for x in self.ed))
        object.__setattr__(self, "ec", tuple(float(x) for x in self.ec))
        if len(self.ed) < 1:
            raise DomainError("schedule needs at least one round")
        if len(self.ec) < len(self.ed) - 1:
            raise DomainError("need a control energy for every round but the last")
        if any(x < 0 for x in self.ed + self.ec):
            raise DomainError("energies must be nonnegative")
        if not 0 <= self.lam < 1:
            raise DomainError("lambda must lie in [0, 1)")
        if not self.n0 > 0:
            raise DomainError("n0 must be positive")

    @property
    def n_rounds(self) -> int:
        return len(self.ed)

    def cumulative_gamma(self, rounds: int) -> float:
        return sum(self.ed[:rounds]) / self.n0


@dataclass(frozen=True)
class ProtocolBound:
    p_e: float
    avg_energy: float
    distortion: float
    bits: float = field(default=0.0)


def pr_uncorrectable(ec_i: float, n0: float, lam: float, exact: bool = True) -> float:
    """Probability that a NACK of energy ``ec_i`` goes unnoticed."""
    if not 0 <= lam < 1:
        raise DomainError("lambda must lie in [0, 1)")
    x = ec_i / n0
    if not exact:
        return uncorrectable_bound(lam, x)
    return marcum_q1_complement(math.sqrt(2.0 * x), math.sqrt(2.0 * lam * x))


def pr_misdetect(ec_i: float, n0: float, lam: float) -> float:
    """Probability that noise alone crosses the threshold ``lam * ec_i``."""
    return math.exp(-lam * ec_i / n0)


def pr_round_error(B: float, cumulative_gamma: float, L: int) -> float:
    """Union bound on a wrong decision after ``L`` combined rounds."""
    return min(1.0, 2.0**B * p2_pairwise(L, cumulative_gamma))


def exact_round_error(B: int, cumulative_gamma: float, L: int) -> float:
    """Exact M-ary error probability for equal-gain combining over L rounds."""
    return rician_pm(1 << int(B), L, cumulative_gamma, 0.0)


def _unclamped_sum(B: float, sched: EnergySchedule) -> float:
    total = 0.0
    n = sched.n_rounds
    for i in range(1, n):
        total += (2.0**B * p2_pairwise(i, sched.cumulative_gamma(i))
                  * pr_uncorrectable(sched.ec[i - 1], sched.n0, sched.lam, exact=False))
    total += 2.0**B * p2_pairwise(n, sched.cumulative_gamma(n))
    return total


def total_error(B: float, sched: EnergySchedule, exact: bool = False) -> float:
    """Bound on the probability that the final decision is wrong.

    Sum over rounds i < N of Pr(E_i) Pr(missed NACK_i), plus Pr(E_N). With
    ``exact`` the union and closed-form NACK bounds are replaced by the exact
    M-ary error probability and the exact Marcum-Q expression.
    """
    n = sched.n_rounds
    total = 0.0
    for i in range(1, n + 1):
        gamma = sched.cumulative_gamma(i)
        p_round = exact_round_error(B, gamma, i) if exact else pr_round_error(B, gamma, i)
        if i < n:
            p_round *= pr_uncorrectable(sched.ec[i - 1], sched.n0, sched.lam, exact=exact)
        total += p_round
    return min(1.0, total)


def avg_energy(B: float, sched: EnergySchedule, exact_round_error_prob: bool = False,
               round_errors: tuple[float, ...] | None = None) -> float:
    """Expected transmitted energy per source sample.

    Round error probabilities default to the union bound; pass
    ``exact_round_error_prob`` for the exact M-ary values or ``round_errors``
    to supply them directly (e.g. measured frequencies).
    """
    n = sched.n_rounds
    if round_errors is None:
        if exact_round_error_prob:
            round_errors = tuple(exact_round_error(B, sched.cumulative_gamma(i), i) for i in range(1, n))
        else:
            round_errors = tuple(pr_round_error(B, sched.cumulative_gamma(i), i) for i in range(1, n))
    energy = sched.ed[0]
    for i in range(1, n):
        p = round_errors[i - 1]
        ec = sched.ec[i - 1]
        p_ec = pr_uncorrectable(ec, sched.n0, sched.lam, exact=True)
        p_ce = pr_misdetect(ec, sched.n0, sched.lam)
        energy += sched.ed[i] * (p * (1.0 - p_ec) + (1.0 - p) * p_ce)
        energy += p * ec
    return energy


def allocate_energies(n_rounds: int, ed1: float, mu: float, lam: float, n0: float = 1.0) -> EnergySchedule:
    """Schedule that equalizes the exponents of the error terms.

    Two rounds: E_D2 = (2 - mu) E_D1 and E_C1 = E_D2 / (2 (1 - sqrt(lam))^2).
    Three rounds: E_D2 = E_D3 = (1 - mu) E_D1, E_C2 = E_D2 / (2 (1 - sqrt(lam))^2),
    E_C1 = 2 E_C2.
    """
    if not 0 <= lam < 1:
        raise DomainError("lambda must lie in [0, 1)")
    if not ed1 > 0:
        raise DomainError("ed1 must be positive")
    gap = 2.0 * (1.0 - math.sqrt(lam)) ** 2
    if n_rounds == 2:
        if not 0 < mu < 2:
            raise DomainError("two-round slack mu must lie in (0, 2)")
        ed2 = (2.0 - mu) * ed1
        return EnergySchedule((ed1, ed2), (ed2 / gap,), lam, n0)
    if n_rounds == 3:
        if not 0 < mu < 1:
            raise DomainError("three-round slack mu must lie in (0, 1)")
        ed2 = (1.0 - mu) * ed1
        ec2 = ed2 / gap
        return EnergySchedule((ed1, ed2, ed2), (2.0 * ec2, ec2), lam, n0)
    raise DomainError("allocation rules exist for 2 or 3 rounds only")


def balanced_bits(B: float, sched: EnergySchedule) -> float:
    """Resolution minimizing 2^{-2b} + 2 P_e(b), never below ``B``.

    The unclamped error bound is linear in 2^b, so the optimum is where
    2^{3b} equals 1 / (error bound per codeword).
    """
    per_codeword = _unclamped_sum(0.0, sched)
    if per_codeword <= 0:
        return float(B)
    return max(float(B), math.log2(1.0 / per_codeword) / 3.0)


def distortion_upper(B: float, sched: EnergySchedule, asymptotic: bool = False) -> ProtocolBound:
    """Upper bound 2^{-2B} + 2 P_e on the end-to-end mean squared error.

    With ``asymptotic`` the resolution is treated as a design variable that
    grows with energy: ``B`` becomes a lower limit and the bound is evaluated
    at :func:`balanced_bits`. This is the regime in which the bound decays
    exponentially in the data energy.
    """
    bits = balanced_bits(B, sched) if asymptotic else float(B)
    p_e = total_error(bits, sched)
    energy = avg_energy(bits, sched)
    return ProtocolBound(p_e, energy, 2.0 ** (-2.0 * bits) + DATA_ERROR_DISTORTION * p_e, bits)


def one_round_distortion(B: float, e: float, n0: float = 1.0) -> float:
    return distortion_upper(B, EnergySchedule((e,), (), 0.0, n0)).distortion


def nominal_exponent(n_rounds: int, mu: float) -> float:
    """Nominal exponent targets (per E_D1/N0) for the balanced bounds.

    The two-round target is steeper than :func:`derived_exponent`; the fitted
    slope follows the derived value.
    """
    if n_rounds == 2:
        return -(1.0 + mu / 3.0)
    if n_rounds == 3:
        return -(1.0 - 2.0 * mu / 3.0)
    raise DomainError("nominal exponent defined for 2 or 3 rounds only")


def derived_exponent(n_rounds: int, mu: float) -> float:
    """Exponent obtained by equating all error exponents with the quantization term.

    The data energies summed over rounds, divided by 3 N0.
    """
    if n_rounds == 2:
        return -(3.0 - mu) / 3.0
    if n_rounds == 3:
        return -(3.0 - 2.0 * mu) / 3.0
    raise DomainError("exponent derived for 2 or 3 rounds only")


def fitted_slope(n_rounds: int, mu: float, lam: float = 0.25, grid=None, B: float = 1.0) -> float:
    """Least-squares slope of ln(balanced bound) against E_D1/N0."""
    xs = np.linspace(30.0, 60.0, 31) if grid is None else np.asarray(grid, dtype=float)
    ys = [math.log(distortion_upper(B, allocate_energies(n_rounds, x, mu, lam), asymptotic=True).distortion)
          for x in xs]
    return float(np.polyfit(xs, ys, 1)[0])


def schedule_for_average_energy(target: float, B: float, mu: float, lam: float,
                                n_rounds: int = 2, n0: float = 1.0,
                                exact_round_error_prob: bool = False) -> EnergySchedule:
    """Two- or three-round allocation whose average energy equals ``target``."""
    if not target > 0:
        raise DomainError("target energy must be positive")

    def gap(ed1: float) -> float:
        s = allocate_energies(n_rounds, ed1, mu, lam, n0)
        return avg_energy(B, s, exact_round_error_prob) - target

    lo = target * 1e-9
    if gap(target) < 0:
        raise DomainError("average energy below first-round energy")
    ed1 = optimize.brentq(gap, lo, target, xtol=1e-13 * target, rtol=1e-13)
    return allocate_energies(n_rounds, ed1, mu, lam, n0)
