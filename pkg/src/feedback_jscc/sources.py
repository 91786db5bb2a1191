"""Correlated source pairs with unit-variance uniform or Gaussian marginals."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

SQRT3 = math.sqrt(3.0)


class SourceModel(enum.Enum):
    MODEL_I = "model_i"    # u2 = rho u1 + sqrt(1-rho^2) u2'
    MODEL_II = "model_ii"  # both sources share a common component


class Distribution(enum.Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class SourceConfig:
    model: SourceModel = SourceModel.MODEL_I
    distribution: Distribution = Distribution.UNIFORM
    rho: float = 0.0
    K: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.rho) and abs(self.rho) <= 1):
            raise DomainError(f"|rho| must not exceed 1, got {self.rho}")
        if self.K < 1:
            raise DomainError("dimension K must be at least 1")


@dataclass(frozen=True)
class CorrelatedPair:
    u1: np.ndarray
    u2: np.ndarray


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator keyed by ``seed`` and an optional stream path."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))


def _base(distribution: Distribution, rng: np.random.Generator, shape) -> np.ndarray:
    if distribution is Distribution.UNIFORM:
        return rng.uniform(-SQRT3, SQRT3, size=shape)
    return rng.standard_normal(size=shape)


def sample_block(cfg: SourceConfig, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` independent pairs, each of shape ``(n, K)``."""
    shape = (n, cfg.K)
    s = math.sqrt(max(0.0, 1.0 - cfg.rho**2))
    if cfg.model is SourceModel.MODEL_I:
        u1 = _base(cfg.distribution, rng, shape)
        u2p = _base(cfg.distribution, rng, shape)
        u2 = u1.copy() if s == 0 else cfg.rho * u1 + s * u2p
        return u1, u2
    common = _base(cfg.distribution, rng, shape)
    u1p = _base(cfg.distribution, rng, shape)
    u2p = _base(cfg.distribution, rng, shape)
    return cfg.rho * common + s * u1p, cfg.rho * common + s * u2p


def sample_pair(cfg: SourceConfig, seed: int) -> CorrelatedPair:
    """One K-dimensional pair, deterministic in ``seed``."""
    u1, u2 = sample_block(cfg, make_rng(seed), 1)
    return CorrelatedPair(u1=u1[0], u2=u2[0])


def pair_density_gaussian(u1: float, u2: float, rho: float) -> float:
    """Standard bivariate normal density with correlation ``rho``."""
    if not abs(rho) < 1:
        raise DomainError("bivariate density is singular at |rho| = 1")
    det = 1.0 - rho * rho
    quad = (u1 * u1 - 2.0 * rho * u1 * u2 + u2 * u2) / det
    return math.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))
