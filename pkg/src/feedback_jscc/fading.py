"""Single-source protocol over a Rician channel.

The received amplitude is sqrt(E)(sqrt(1-alpha) e^{j phi} + sqrt(alpha) h) with
h ~ CN(0, 1), so ``alpha`` is the diffuse (non line-of-sight) energy fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .protocol_single import EnergySchedule, pr_misdetect
from .special import DEFAULT_QUADRATURE, Quadrature, marcum_q1_complement, rician_pm


@dataclass(frozen=True)
class RicianSpec:
    alpha: float = 0.0
    n0: float = 1.0

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise DomainError("alpha must lie in [0, 1]")
        if not self.n0 > 0:
            raise DomainError("n0 must be positive")


def rician_uncorrectable(ec: float, spec: RicianSpec, lam: float) -> float:
    """Pr(|sqrt((1-a)Ec) + sqrt(a Ec) h + z|^2 <= lam Ec).

    The diffuse part adds a Ec to the noise variance; the threshold is scaled
    by that total variance only.
    """
    if not 0 <= lam < 1:
        raise DomainError("lambda must lie in [0, 1)")
    if ec < 0:
        raise DomainError("ec must be nonnegative")
    a = spec.alpha
    var = a * ec + spec.n0
    return marcum_q1_complement(math.sqrt(2.0 * (1.0 - a) * ec / var),
                                math.sqrt(2.0 * lam * ec / var))


def _check_two_round(sched: EnergySchedule) -> None:
    if sched.n_rounds != 2:
        raise DomainError("fading bound is for two-round schedules")


def rician_error_probability(B: int, sched: EnergySchedule, spec: RicianSpec,
                             quad: Quadrature = DEFAULT_QUADRATURE, per_round: bool = False) -> float:
    """P_M(L=1) Pr(missed NACK) + P_M(L=2), clamped to 1.

    ``per_round`` evaluates P_M(L=2) with independent fading in each round
    (see :func:`rician_pm`). The default form counts the diffuse energy once
    per round and underestimates the error of independently faded rounds.
    """
    _check_two_round(sched)
    M = 1 << B
    p1 = rician_pm(M, 1, sched.ed[0] / spec.n0, spec.alpha, quad)
    p2 = rician_pm(M, 2, (sched.ed[0] + sched.ed[1]) / spec.n0, spec.alpha, quad, per_round)
    p_ec = rician_uncorrectable(sched.ec[0], spec, sched.lam)
    return min(1.0, p1 * p_ec + p2)


def rician_distortion_two(B: int, sched: EnergySchedule, spec: RicianSpec,
                          quad: Quadrature = DEFAULT_QUADRATURE, per_round: bool = False) -> float:
    return 2.0 ** (-2 * B) + 2.0 * rician_error_probability(B, sched, spec, quad, per_round)


def rician_distortion_one(B: int, e: float, spec: RicianSpec,
                          quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    return 2.0 ** (-2 * B) + 2.0 * rician_pm(1 << B, 1, e / spec.n0, spec.alpha, quad)


def rician_avg_energy(B: int, sched: EnergySchedule, spec: RicianSpec,
                      quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Average energy of the two-round protocol with exact first-round error probability."""
    _check_two_round(sched)
    p1 = rician_pm(1 << B, 1, sched.ed[0] / spec.n0, spec.alpha, quad)
    ec = sched.ec[0]
    p_ec = rician_uncorrectable(ec, spec, sched.lam)
    p_ce = pr_misdetect(ec, spec.n0, sched.lam)
    return sched.ed[0] + p1 * ec + (p1 * (1 - p_ec) + (1 - p1) * p_ce) * sched.ed[1]
