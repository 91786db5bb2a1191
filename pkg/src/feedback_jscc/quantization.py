"""Scalar quantizers, compatible bin pairs and closed-form distortion terms."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedCaseError
from .sources import SQRT3

LN2 = math.log(2.0)


class QuantizerKind(enum.Enum):
    UNIFORM = "uniform"              # 2^B equal bins on (-sqrt3, sqrt3)
    UNIFORM_TAILS = "uniform_tails"  # 2^B - 2 interior bins plus one bin per tail
    GAUSSIAN_GRID = "gaussian_grid"  # interior grid on [-delta, delta] plus tails


@dataclass(frozen=True)
class QuantizerSpec:
    kind: QuantizerKind
    B: int
    edges: np.ndarray
    levels: np.ndarray
    delta: float | None = None

    @property
    def size(self) -> int:
        return 1 << self.B


@dataclass(frozen=True)
class DistortionTerms:
    d_q: float
    d_e1: float
    d_e2: float
    d_ec1: float | None = None
    d_eic1: float | None = None


def gaussian_delta(B: int) -> float:
    return 2.0 * math.sqrt(B * LN2)


def _frozen(a) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _symmetric_grid(half_width: float, n_bins: int) -> np.ndarray:
    # integer numerators keep the centre edge at exactly 0 when n_bins is even
    k = np.arange(n_bins + 1)
    return half_width * ((2 * k - n_bins) / n_bins)


def build_quantizer(kind: QuantizerKind, B: int, rho: float = 1.0) -> QuantizerSpec:
    """Build one of the three quantizers.

    The outermost edges are always +-inf so every real input has a bin.

    ``UNIFORM_TAILS`` puts its interior grid on (-sqrt3*rho, sqrt3*rho); the two
    tail bins cover the overhang [sqrt3*rho, sqrt3*(rho + sqrt(1-rho^2))] and its
    mirror image, with the reconstruction level at the overhang midpoint.
    """
    if B < 2:
        raise UnsupportedCaseError(f"need B >= 2 for two interior bins, got {B}")
    M = 1 << B
    if kind is QuantizerKind.UNIFORM:
        inner = _symmetric_grid(SQRT3, M)
        levels = 0.5 * (inner[:-1] + inner[1:])
        edges = inner.copy()
        edges[0], edges[-1] = -math.inf, math.inf
        return QuantizerSpec(kind, B, _frozen(edges), _frozen(levels))
    if kind is QuantizerKind.GAUSSIAN_GRID:
        delta = gaussian_delta(B)
        inner = _symmetric_grid(delta, M - 2)
        mids = 0.5 * (inner[:-1] + inner[1:])
        levels = np.concatenate(([-delta], mids, [delta]))
        edges = np.concatenate(([-math.inf], inner, [math.inf]))
        return QuantizerSpec(kind, B, _frozen(edges), _frozen(levels), delta)
    if kind is QuantizerKind.UNIFORM_TAILS:
        if not 0 < rho <= 1:
            raise DomainError(f"uniform-tails quantizer needs 0 < rho <= 1, got {rho}")
        s = math.sqrt(max(0.0, 1.0 - rho * rho))
        inner = _symmetric_grid(SQRT3 * rho, M - 2)
        mids = 0.5 * (inner[:-1] + inner[1:])
        tail_level = SQRT3 * (rho + 0.5 * s)
        levels = np.concatenate(([-tail_level], mids, [tail_level]))
        edges = np.concatenate(([-math.inf], inner, [math.inf]))
        return QuantizerSpec(kind, B, _frozen(edges), _frozen(levels))
    raise UnsupportedCaseError(f"unknown quantizer kind {kind}")


def quantize(q: QuantizerSpec, u):
    """Bin index with half-open bins [low, high); accepts scalars or arrays."""
    idx = np.searchsorted(q.edges, u, side="right") - 1
    idx = np.clip(idx, 0, q.size - 1)
    return int(idx) if np.ndim(idx) == 0 else idx


def reconstruct(q: QuantizerSpec, n):
    out = q.levels[n]
    return float(out) if np.ndim(out) == 0 else out


def _scaled_interval(lo: float, hi: float, rho: float) -> tuple[float, float]:
    if rho == 0:
        return 0.0, 0.0
    a, b = rho * lo, rho * hi
    return (a, b) if a <= b else (b, a)


def compatible_range(q: QuantizerSpec, m: int, theta: float, rho: float) -> tuple[int, int]:
    """Inclusive index range of bins compatible with bin ``m``.

    Bin n is compatible when some u1 in bin m and u2 in bin n satisfy
    |rho*u1 - u2| < theta. The reachable u2 values form an open interval, so
    the compatible bins are contiguous.
    """
    if not 0 <= m < q.size:
        raise DomainError(f"bin index {m} out of range")
    if theta < 0:
        raise DomainError("theta must be nonnegative")
    lo, hi = _scaled_interval(q.edges[m], q.edges[m + 1], rho)
    left, right = lo - theta, hi + theta
    lower, upper = q.edges[:-1], q.edges[1:]
    hits = np.nonzero((lower < right) & (upper > left))[0]
    if hits.size == 0:
        return (m, m - 1)
    return int(hits[0]), int(hits[-1])


def compatible_set(q: QuantizerSpec, m: int, theta: float, rho: float) -> frozenset[int]:
    first, last = compatible_range(q, m, theta, rho)
    return frozenset(range(first, last + 1))


def cardinality_factor(B: int, scale: float) -> int:
    """Ceiling count ceil(2^B * scale) used by the dual error bounds."""
    return math.ceil((1 << B) * scale) if scale > 0 else 0


def distortion_terms_uniform(B: int, rho: float) -> DistortionTerms:
    """Closed-form quantization and error distortions for the uniform pair."""
    if B < 2:
        raise UnsupportedCaseError("need B >= 2")
    if rho == 0:
        raise DomainError("quantization term divides by rho")
    if abs(rho) > 1:
        raise DomainError("|rho| must not exceed 1")
    r2 = 1.0 - rho * rho
    s = math.sqrt(r2)
    d_q = ((12.0 + r2 / rho**2 - 4.0 * math.sqrt(3.0 * r2) / rho) / (2**B - 2) ** 2
           + (3.0 * r2) ** 1.5 / (8.0 * rho**3))
    d_e1 = 6.0 * (2.0 ** (-2 * B + 2) + 5.0 * r2 + 2.0 ** (-B + 3) * s)
    d_e2 = 14.0 + 12.0 * rho**2 + 3.0 * r2 / 4.0 + 6.0 * rho * s
    return DistortionTerms(d_q=d_q, d_e1=d_e1, d_e2=d_e2)


def _gaussian_tail_piece(delta: float) -> float:
    return math.exp(-delta**2 / 2) * (delta / math.sqrt(2 * math.pi) + (1 + delta**2) / 2)


def distortion_terms_gaussian(B: int, rho: float, theta: float) -> DistortionTerms:
    """Closed-form distortion terms for the Gaussian grid quantizer.

    ``d_e1`` duplicates ``d_ec1`` (single source in error, pair compatible).
    """
    if B < 2:
        raise UnsupportedCaseError("need B >= 2")
    if theta <= 0:
        raise DomainError("theta must be positive")
    delta = gaussian_delta(B)
    grid = delta**2 / (2**B - 2) ** 2
    tail = _gaussian_tail_piece(delta)
    r2 = 1.0 - rho * rho
    d_q = 4.0 * tail + 2.0 * grid
    bl = B * LN2
    root = math.sqrt(2.0 * bl / math.pi)
    d_e2 = 32.0 * bl + 4.0 * root + 4.0 * math.exp(-2.0 * bl) * (1.0 - 4.0 * bl + 2.0 * root)
    d_ec1 = 2.0 * tail + grid + 4.0 * theta**2 * r2
    d_eic1 = 2.0 * tail + grid + 3.0 * theta**2 * r2 + r2
    return DistortionTerms(d_q=d_q, d_e1=d_ec1, d_e2=d_e2, d_ec1=d_ec1, d_eic1=d_eic1)
