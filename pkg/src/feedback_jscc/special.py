"""Special functions and pairwise error probabilities for non-coherent detection.

Everything here is a pure function. Bessel evaluations go through
``scipy.special`` (exponentially scaled where products could overflow) and
integrals through ``scipy.integrate.quad``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NonConvergenceError

MAX_DIVERSITY = 16


@dataclass(frozen=True)
class Quadrature:
    """Settings for adaptive quadrature.

    Parameters
    ----------
    rel_tol, abs_tol : float
        Tolerances handed to the integrator.
    truncation_point : float or None
        Finite upper limit replacing infinity. ``None`` picks a limit from the
        mean and spread of the integrand (see :func:`rician_pm`).
    max_subdivisions : int
        Subinterval budget; exceeding it raises :class:`NonConvergenceError`.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    truncation_point: float | None = None
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.truncation_point is not None and not self.truncation_point > 0:
            raise DomainError("truncation point must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be at least 1")


DEFAULT_QUADRATURE = Quadrature()


def _check_nonneg(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    if value < 0:
        raise DomainError(f"{name} must be nonnegative, got {value}")


def bessel_i(order: int, x: float) -> float:
    """Modified Bessel function of the first kind, I_order(x).

    Raises ``OverflowError`` when the value exceeds double range (x beyond
    roughly 713); use :func:`log_bessel_i` there.
    """
    if order < 0:
        raise DomainError("order must be nonnegative")
    _check_nonneg("x", x)
    scaled = float(special.ive(order, x))
    log_value = math.log(scaled) + x if scaled > 0 else -math.inf
    if log_value > 709.78:
        raise OverflowError(f"I_{order}({x}) exceeds double range")
    return float(special.iv(order, x))


def log_bessel_i(order: int, x: float) -> float:
    """Natural log of I_order(x), finite for any x > 0."""
    if order < 0:
        raise DomainError("order must be nonnegative")
    _check_nonneg("x", x)
    if x == 0:
        return 0.0 if order == 0 else -math.inf
    return math.log(float(special.ive(order, x))) + x


def _marcum_density(x: float, a: float) -> float:
    # x exp(-(x^2+a^2)/2) I0(ax), written with the scaled Bessel function
    return x * math.exp(-0.5 * (x - a) ** 2) * float(special.ive(0, a * x))


def _integrate(f, lo: float, hi: float, points=None, epsabs=0.0, epsrel=1e-12, limit=200):
    kwargs = {"epsabs": epsabs, "epsrel": epsrel, "limit": limit, "full_output": 1}
    if points:
        inside = [p for p in points if lo < p < hi]
        if inside:
            kwargs["points"] = inside
    out = integrate.quad(f, lo, hi, **kwargs)
    value, abserr = out[0], out[1]
    if not math.isfinite(value):
        raise NonConvergenceError("quadrature produced a non-finite value")
    if len(out) > 3:
        # only fatal if the reported error is above what callers can tolerate
        if abserr > max(1e3 * epsabs, epsrel * abs(value), 1e-12):
            raise NonConvergenceError(f"quadrature did not converge: {out[3]}")
    return value


def _marcum_parts(a: float, b: float) -> tuple[float, float]:
    """Return (Q1(a,b), 1 - Q1(a,b)), each computed directly when it is the small one."""
    _check_nonneg("a", a)
    _check_nonneg("b", b)
    if b == 0:
        return 1.0, 0.0
    if a == 0:
        tail = math.exp(-0.5 * b * b)
        return tail, -math.expm1(-0.5 * b * b)
    if b <= a:
        head = _integrate(lambda x: _marcum_density(x, a), 0.0, b, points=[a])
        head = min(max(head, 0.0), 1.0)
        return 1.0 - head, head
    hi = b + max(40.0, 10.0 * math.sqrt(b))
    tail = _integrate(lambda x: _marcum_density(x, a), b, hi, points=[a])
    tail = min(max(tail, 0.0), 1.0)
    return tail, 1.0 - tail


def marcum_q1(a: float, b: float) -> float:
    """First-order Marcum Q function Q1(a, b)."""
    return _marcum_parts(a, b)[0]


def marcum_q1_complement(a: float, b: float) -> float:
    """1 - Q1(a, b), accurate when the result is tiny."""
    return _marcum_parts(a, b)[1]


def uncorrectable_bound(lam: float, ec_over_n0: float) -> float:
    """Closed-form bound 0.5·exp(-(sqrt(lam)-1)^2·Ec/N0) on a missed NACK."""
    if not 0 <= lam < 1:
        raise DomainError(f"threshold lambda must lie in [0, 1), got {lam}")
    _check_nonneg("ec_over_n0", ec_over_n0)
    return 0.5 * math.exp(-((math.sqrt(lam) - 1.0) ** 2) * ec_over_n0)


@lru_cache(maxsize=None)
def _p2_coefficients(L: int) -> tuple[float, ...]:
    if L < 1:
        raise DomainError("diversity order L must be at least 1")
    if L > MAX_DIVERSITY:
        raise OverflowError(f"L={L} exceeds the supported maximum {MAX_DIVERSITY}")
    n_total = 2 * L - 1
    coeffs = []
    for n in range(L):
        binom_sum = sum(math.comb(n_total, k) for k in range(L - n))
        coeffs.append(binom_sum / math.factorial(n))
    return tuple(coeffs)


def _p2_core(L: int, x: float) -> float:
    # 2^{-(2L-1)} e^{-x} sum_n c_n x^n
    coeffs = _p2_coefficients(L)
    poly = sum(c * x**n for n, c in enumerate(coeffs))
    value = math.exp(-x) * poly / 2 ** (2 * L - 1)
    return min(max(value, 0.0), 1.0)


def p2_pairwise(L: int, gamma: float) -> float:
    """Pairwise error probability of L-fold square-law combining.

    Binary orthogonal hypotheses, total SNR ``gamma`` accumulated over the
    L observations.
    """
    _check_nonneg("gamma", gamma)
    return _p2_core(L, gamma / 2.0)


def p2_gaussian_variant(L: int, gamma: float) -> float:
    """Same polynomial as :func:`p2_pairwise` with e^{-gamma} and gamma^n."""
    _check_nonneg("gamma", gamma)
    return _p2_core(L, gamma)


def _correct_branch_density(v: float, L: int, nc: float) -> float:
    """Density of the normalized correct-branch statistic.

    Noncentral chi-square with 2L degrees of freedom in the convention where
    each complex dimension contributes unit mean noise power; ``nc`` is the
    noncentrality.
    """
    if v <= 0:
        return math.exp(-nc) if L == 1 else 0.0
    if nc < 1e-300:
        return math.exp((L - 1) * math.log(v) - v - math.lgamma(L))
    z = 2.0 * math.sqrt(v * nc)
    scaled = float(special.ive(L - 1, z))
    if scaled == 0.0:
        return 0.0
    log_val = 0.5 * (L - 1) * (math.log(v) - math.log(nc)) - (math.sqrt(v) - math.sqrt(nc)) ** 2
    return math.exp(log_val) * scaled


def rician_pm(M: int, L: int, gamma: float, alpha: float,
              quad: Quadrature = DEFAULT_QUADRATURE, per_round: bool = False) -> float:
    """Symbol error probability of M-ary orthogonal non-coherent detection.

    The correct branch sees a Rician channel with a fraction ``alpha`` of the
    energy in the diffuse component; ``gamma`` is the cumulative data SNR over
    the ``L`` combined observations.

    The integrand is arranged as ``f_c(v) * (1 - F_w(v)^(M-1))`` where ``f_c`` is
    the correct-branch density and ``F_w`` the wrong-branch CDF, which equals
    ``1 - integral(f_c F_w^(M-1))`` but keeps relative accuracy when the error
    probability is small.

    By default every observation carries the full cumulative diffuse energy
    ``alpha * gamma``. With ``per_round`` the diffuse energy is split evenly
    over the ``L`` observations, which is exact for independent fading per
    observation and equal observation energies. The two agree for ``L = 1``.
    """
    if M < 2 or (M & (M - 1)) != 0:
        raise DomainError(f"M must be a power of two >= 2, got {M}")
    if L < 1:
        raise DomainError("L must be at least 1")
    _check_nonneg("gamma", gamma)
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")

    spread = 1.0 + alpha * gamma / (L if per_round else 1)
    nc = gamma * (1.0 - alpha) / spread

    def integrand(v: float) -> float:
        f = _correct_branch_density(v, L, nc)
        if f == 0.0:
            return 0.0
        tail = float(special.gammaincc(L, v * spread))
        miss = -math.expm1((M - 1) * math.log1p(-tail)) if tail < 1.0 else 1.0
        return f * miss

    centre = nc + L
    if quad.truncation_point is not None:
        upper = quad.truncation_point
    else:
        upper = centre + 15.0 * math.sqrt(2.0 * nc + L) + 50.0
    points = [centre]
    if nc > 0:
        points.append(max(centre - 5.0 * math.sqrt(2.0 * nc + L), 0.0))
    breaks = sorted(set(p for p in points if 0 < p < upper))
    if len(breaks) >= quad.max_subdivisions:
        breaks = None  # quadpack needs more subintervals than break points
    out = integrate.quad(integrand, 0.0, upper, epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                         limit=quad.max_subdivisions, points=breaks, full_output=1)
    value, abserr = out[0], out[1]
    if not math.isfinite(value):
        raise NonConvergenceError("rician_pm quadrature produced a non-finite value")
    if len(out) > 3 and abserr > max(quad.abs_tol, quad.rel_tol * abs(value)) * 1e3:
        raise NonConvergenceError(f"rician_pm quadrature did not converge: {out[3]}")
    return float(np.clip(value, 0.0, 1.0))
