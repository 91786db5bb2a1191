"""Information-theoretic distortion lower bounds and the regime selector.

Energies are per source sample; ``N`` channel uses per ``K`` source samples.
``N=None`` selects the infinite-bandwidth (asymptotic) form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError, UnsupportedCaseError
from .sources import Distribution, SourceModel

ASYMPTOTIC = None

UNIFORM_ENTROPY_CONSTANT = 6.0 / (math.pi * math.e)


class Channel(enum.Enum):
    SUM = "sum"
    PARALLEL = "parallel"


class Regime(enum.Enum):
    HIGH = "high"
    LOW = "low"
    PRODUCT = "product"
    TIGHT = "tight"
    SINGLE = "single"


@dataclass(frozen=True)
class BoundQuery:
    distribution: Distribution
    channel: Channel = Channel.SUM
    rho: float = 0.0
    e1: float = 0.0
    e2: float = 0.0
    n0: float = 1.0
    K: int = 1
    N: int | None = ASYMPTOTIC
    model: SourceModel = SourceModel.MODEL_I

    def __post_init__(self):
        if self.e1 < 0 or self.e2 < 0:
            raise DomainError("energies must be nonnegative")
        if not self.n0 > 0:
            raise DomainError("n0 must be positive")
        if self.K < 1 or (self.N is not None and self.N < 1):
            raise DomainError("K and N must be positive")
        if abs(self.rho) > 1:
            raise DomainError("|rho| must not exceed 1")
        if self.model is not SourceModel.MODEL_I:
            raise UnsupportedCaseError("bounds are only available for source model I")

    def energy(self, source: int) -> float:
        if source not in (1, 2):
            raise DomainError("source index must be 1 or 2")
        return self.e1 if source == 1 else self.e2


@dataclass(frozen=True)
class BoundResult:
    value: float
    regime: Regime
    constant: float


def energy_factor(e: float, n0: float, K: int = 1, N: int | None = ASYMPTOTIC) -> float:
    """(1 + K e/(N n0))^(-2N/K), or exp(-2e/n0) in the limit N -> inf."""
    if N is None:
        return math.exp(-2.0 * e / n0)
    return math.exp(-2.0 * N / K * math.log1p(K * e / (N * n0)))


def goblick_bound(e: float, n0: float) -> float:
    """Point-to-point bound exp(-2E/N0) for a unit-variance Gaussian sample."""
    if e < 0 or not n0 > 0:
        raise DomainError("need e >= 0 and n0 > 0")
    return math.exp(-2.0 * e / n0)


def _single_constant(distribution: Distribution) -> float:
    return UNIFORM_ENTROPY_CONSTANT if distribution is Distribution.UNIFORM else 1.0


def single_split_bound(q: BoundQuery) -> BoundResult:
    c = _single_constant(q.distribution)
    return BoundResult(c * energy_factor(q.e1, q.n0, q.K, q.N), Regime.SINGLE, c)


def high_constant(distribution: Distribution) -> float:
    return _single_constant(distribution)


def low_constant(distribution: Distribution, source: int, rho: float) -> float:
    r2 = 1.0 - rho * rho
    if distribution is Distribution.GAUSSIAN:
        return r2
    if source == 1:
        return 36.0 * r2 / (math.pi * math.e) ** 2
    return 6.0 * r2 / (math.pi * math.e)


def product_constant(distribution: Distribution, rho: float) -> float:
    r2 = 1.0 - rho * rho
    if distribution is Distribution.GAUSSIAN:
        return r2
    return 36.0 * r2 / (math.pi * math.e) ** 2


def _joint_factor(q: BoundQuery) -> float:
    if q.channel is Channel.PARALLEL and q.N is not None:
        return energy_factor(q.e1, q.n0, q.K, q.N) * energy_factor(q.e2, q.n0, q.K, q.N)
    return energy_factor(q.e1 + q.e2, q.n0, q.K, q.N)


def dual_bound(q: BoundQuery, source: int, regime: Regime) -> BoundResult:
    """Per-source bound for the pair in a given correlation regime.

    ``PRODUCT`` bounds the product D1*D2 rather than a single distortion.
    """
    e_m = q.energy(source)
    if regime is Regime.HIGH:
        c = high_constant(q.distribution)
        return BoundResult(c * _joint_factor(q), regime, c)
    if regime is Regime.LOW:
        c = low_constant(q.distribution, source, q.rho)
        return BoundResult(c * energy_factor(e_m, q.n0, q.K, q.N), regime, c)
    if regime is Regime.PRODUCT:
        c = product_constant(q.distribution, q.rho)
        return BoundResult(c * _joint_factor(q), regime, c)
    raise UnsupportedCaseError(f"dual_bound does not handle regime {regime}")


def parallel_tight_bound(q: BoundQuery, source: int) -> BoundResult:
    """Two-term bound for separate (parallel) channels.

    For the Gaussian first source both terms carry the source's own energy
    factor, matching the infinite-bandwidth form.
    """
    f1 = energy_factor(q.e1, q.n0, q.K, q.N)
    f2 = energy_factor(q.e2, q.n0, q.K, q.N)
    r2 = 1.0 - q.rho**2
    if q.distribution is Distribution.UNIFORM:
        if source != 2:
            raise UnsupportedCaseError("no tight bound for the first uniform source")
        c = UNIFORM_ENTROPY_CONSTANT
        return BoundResult(c * r2 * f2 + c * q.rho**2 * f1 * f2, Regime.TIGHT, c)
    if source == 2:
        return BoundResult(r2 * f2 + q.rho**2 * f1 * f2, Regime.TIGHT, 1.0)
    if source == 1:
        if q.rho == 0:
            raise DomainError("first-source tight bound divides by rho")
        inv = 1.0 / q.rho**2
        return BoundResult(r2 * inv * f1 + inv * f1 * f2, Regime.TIGHT, inv)
    raise DomainError("source index must be 1 or 2")


def regime_select(q: BoundQuery, source: int, d_other: float) -> BoundResult:
    """Pick the applicable bound given the other source's distortion.

    Conditions are checked in the order HIGH, LOW, PRODUCT, so boundary ties
    resolve to HIGH.
    """
    other = 2 if source == 1 else 1
    if source not in (1, 2):
        raise DomainError("source index must be 1 or 2")
    if d_other < 0:
        raise DomainError("d_other must be nonnegative")
    g = math.exp(-2.0 * q.energy(other) / q.n0)
    r2 = 1.0 - q.rho**2
    if q.distribution is Distribution.GAUSSIAN:
        high = r2 <= min(d_other, g)
        low = d_other >= g and r2 >= g
    elif source == 1:
        c = UNIFORM_ENTROPY_CONSTANT * r2
        high = c <= min(d_other, g)
        low = d_other >= g and c >= g
    else:
        high = r2 <= min(d_other / UNIFORM_ENTROPY_CONSTANT, g)
        low = d_other >= UNIFORM_ENTROPY_CONSTANT * g and r2 >= g
    if high:
        return dual_bound(q, source, Regime.HIGH)
    if low:
        return dual_bound(q, source, Regime.LOW)
    if d_other <= 0:
        raise DomainError("PRODUCT branch needs d_other > 0")
    prod = dual_bound(q, source, Regime.PRODUCT)
    return BoundResult(prod.value / d_other, Regime.PRODUCT, prod.constant)
