"""Event-level Monte Carlo simulation of the retransmission protocol.

Codewords are the standard basis of C^M with M = 2^B, so the projection of the
received vector on codeword k is simply its k-th coordinate. Trials are
processed in fixed-size blocks; block b draws from a Philox stream keyed by
(seed, b), which makes the output independent of how blocks are scheduled.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .protocol_dual import DualSchedule
from .protocol_single import EnergySchedule
from .quantization import QuantizerKind, QuantizerSpec, compatible_range, quantize
from .sources import SQRT3, SourceConfig, make_rng, sample_block

BLOCK_SIZE = 8192
MAX_BITS = 16


class ChannelKind(enum.Enum):
    AWGN_NONCOHERENT = "awgn"
    RICIAN = "rician"


@dataclass(frozen=True)
class ChannelSpec:
    kind: ChannelKind = ChannelKind.AWGN_NONCOHERENT
    alpha: float = 0.0
    n0: float = 1.0

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise DomainError("alpha must lie in [0, 1]")
        if not self.n0 > 0:
            raise DomainError("n0 must be positive")

    @property
    def diffuse(self) -> float:
        return self.alpha if self.kind is ChannelKind.RICIAN else 0.0


@dataclass(frozen=True)
class TrialConfig:
    source: SourceConfig
    quantizer: QuantizerSpec
    schedule: EnergySchedule | DualSchedule
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    trials: int = 100_000
    seed: int = 0
    search_theta: float | None = None  # dual only; None derives it from the source

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("need at least one trial")
        if self.quantizer.B > MAX_BITS:
            raise DomainError(f"codebook size limited to 2^{MAX_BITS}")
        if self.source.K != 1:
            raise DomainError("protocol trials use scalar sources (K=1)")


@dataclass(frozen=True)
class EventCounts:
    """Per-round tallies; the control-phase entries have one fewer round."""

    reached: tuple[int, ...]
    errors: tuple[int, ...]
    uncorrectable: tuple[int, ...]
    false_alarm: tuple[int, ...]


@dataclass(frozen=True)
class SimStats:
    trials: int
    empirical_mse: float
    mse_stderr: float
    per_round_error_rate: tuple[float, ...]
    final_error_rate: float
    retransmission_rate: float
    measured_avg_energy: float
    energy_stderr: float
    counts: EventCounts
    per_source_mse: tuple[float, ...] = ()
    per_source_mse_stderr: tuple[float, ...] = ()
    per_source_energy: tuple[float, ...] = ()
    first_round_joint: tuple[float, float, float] = ()  # (only 1 wrong, only 2 wrong, both wrong)


def codebook(M: int) -> np.ndarray:
    """Orthonormal codewords as rows of the identity matrix."""
    return np.eye(M, dtype=complex)


# ---------------------------------------------------------------------------
# accumulation


@dataclass
class _Tally:
    rounds: int
    sources: int
    n: int = 0
    se: np.ndarray = None       # per source sums of squared error
    se_sq: np.ndarray = None    # per source sums of squared squared error
    tot_sq: float = 0.0         # sum over trials of (sum over sources se)^2
    energy: np.ndarray = None   # per source energy sums
    energy_sq: float = 0.0      # sum of squared per-trial total energy
    reached: np.ndarray = None
    errors: np.ndarray = None
    uncorrectable: np.ndarray = None
    false_alarm: np.ndarray = None
    final_errors: int = 0
    joint: np.ndarray = None    # first-round (10, 01, 11) counts

    def __post_init__(self):
        z = lambda k: np.zeros(k, dtype=np.int64)
        self.se = np.zeros(self.sources)
        self.se_sq = np.zeros(self.sources)
        self.energy = np.zeros(self.sources)
        self.reached = z(self.rounds)
        self.errors = z(self.rounds)
        self.uncorrectable = z(max(self.rounds - 1, 0))
        self.false_alarm = z(max(self.rounds - 1, 0))
        self.joint = z(3)

    def merge(self, other: "_Tally") -> "_Tally":
        out = _Tally(self.rounds, self.sources)
        for name in ("n", "tot_sq", "energy_sq", "final_errors"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        for name in ("se", "se_sq", "energy", "reached", "errors", "uncorrectable", "false_alarm", "joint"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        return out

    def add_errors(self, sq_err: np.ndarray, energy: np.ndarray) -> None:
        """``sq_err`` and ``energy`` have shape (trials, sources)."""
        self.n += sq_err.shape[0]
        self.se += sq_err.sum(axis=0)
        self.se_sq += (sq_err**2).sum(axis=0)
        self.tot_sq += float((sq_err.sum(axis=1) ** 2).sum())
        self.energy += energy.sum(axis=0)
        self.energy_sq += float((energy.sum(axis=1) ** 2).sum())

    def finish(self) -> SimStats:
        n = self.n
        mse = float(self.se.sum() / n)
        var = max(self.tot_sq / n - mse**2, 0.0)
        e_mean = float(self.energy.sum() / n)
        e_var = max(self.energy_sq / n - e_mean**2, 0.0)
        src_mse = tuple(float(x / n) for x in self.se)
        src_err = tuple(math.sqrt(max(q / n - m * m, 0.0) / n) for q, m in zip(self.se_sq, src_mse))
        rates = tuple(float(e / r) if r else 0.0 for e, r in zip(self.errors, self.reached))
        return SimStats(
            trials=n,
            empirical_mse=mse,
            mse_stderr=math.sqrt(var / n),
            per_round_error_rate=rates,
            final_error_rate=self.final_errors / n,
            retransmission_rate=float(self.reached[1] / n) if self.rounds > 1 else 0.0,
            measured_avg_energy=e_mean,
            energy_stderr=math.sqrt(e_var / n),
            counts=EventCounts(*(tuple(int(x) for x in a) for a in
                                 (self.reached, self.errors, self.uncorrectable, self.false_alarm))),
            per_source_mse=src_mse if self.sources > 1 else (),
            per_source_mse_stderr=src_err if self.sources > 1 else (),
            per_source_energy=tuple(float(x / n) for x in self.energy) if self.sources > 1 else (),
            first_round_joint=tuple(float(x / n) for x in self.joint) if self.sources > 1 else (),
        )


# ---------------------------------------------------------------------------
# channel


def _gain(rng: np.random.Generator, n: int, channel: ChannelSpec) -> np.ndarray:
    """Unit-energy complex channel gain with a uniform carrier phase."""
    phase = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=n))
    a = channel.diffuse
    if a == 0.0:
        return phase
    h = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
    return math.sqrt(1.0 - a) * phase + math.sqrt(a) * h


def _noise(rng: np.random.Generator, shape, n0: float) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(n0 / 2.0)


def _data_phase(rng, msgs: np.ndarray, M: int, energy: float, channel: ChannelSpec,
                phase_offset: float) -> np.ndarray:
    """Square-law statistics |<Y, S_k>|^2 for every codeword, shape (n, M)."""
    n = msgs.shape[0]
    y = _noise(rng, (n, M), channel.n0)
    y[np.arange(n), msgs] += math.sqrt(energy) * _gain(rng, n, channel)
    if phase_offset:
        y *= np.exp(1j * phase_offset)
    return np.abs(y) ** 2


def _control_phase(rng, wrong: np.ndarray, energy: float, lam: float, channel: ChannelSpec) -> np.ndarray:
    """On-off NACK; returns the receiver's 'error detected' flags."""
    n = wrong.shape[0]
    y = _noise(rng, n, channel.n0)
    y = y + wrong * math.sqrt(energy) * _gain(rng, n, channel)
    return np.abs(y) ** 2 > lam * energy


# ---------------------------------------------------------------------------
# single source


def _single_block(cfg: TrialConfig, block: int, n: int, phase_offset: float = 0.0) -> _Tally:
    sched = cfg.schedule
    q = cfg.quantizer
    M = q.size
    rng = make_rng(cfg.seed, block)
    u, _ = sample_block(cfg.source, rng, n)
    u = u[:, 0]
    msgs = quantize(q, u)
    R = sched.n_rounds
    tally = _Tally(R, 1)
    stats = np.zeros((n, M))
    decision = np.zeros(n, dtype=np.int64)
    energy = np.zeros(n)
    active = np.arange(n)
    for r in range(R):
        tally.reached[r] += active.size
        stats[active] += _data_phase(rng, msgs[active], M, sched.ed[r], cfg.channel, phase_offset)
        energy[active] += sched.ed[r]
        decision[active] = np.argmax(stats[active], axis=1)
        wrong = decision[active] != msgs[active]
        tally.errors[r] += int(wrong.sum())
        if r == R - 1 or active.size == 0:
            break
        ec = sched.ec[r]
        energy[active[wrong]] += ec
        detected = _control_phase(rng, wrong, ec, sched.lam, cfg.channel)
        tally.uncorrectable[r] += int((wrong & ~detected).sum())
        tally.false_alarm[r] += int((~wrong & detected).sum())
        active = active[detected]
    tally.final_errors = int((decision != msgs).sum())
    sq = (u - q.levels[decision]) ** 2
    tally.add_errors(sq[:, None], energy[:, None])
    return tally


# ---------------------------------------------------------------------------
# two sources


def search_ranges(q: QuantizerSpec, theta: float, rho: float) -> tuple[np.ndarray, np.ndarray]:
    bounds = [compatible_range(q, m, theta, rho) for m in range(q.size)]
    return np.array([b[0] for b in bounds]), np.array([b[1] for b in bounds])


def default_search_theta(cfg: TrialConfig) -> float:
    """Half-width of rho*u1 - u2; exact support for uniform pairs."""
    if cfg.search_theta is not None:
        return cfg.search_theta
    s = math.sqrt(max(0.0, 1.0 - cfg.source.rho**2))
    if cfg.quantizer.kind in (QuantizerKind.UNIFORM, QuantizerKind.UNIFORM_TAILS):
        return SQRT3 * s * (1.0 + 1e-9) + 1e-12
    return cfg.schedule.theta


def joint_decision(stats1: np.ndarray, stats2: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Maximize stats1[k] + stats2[l] over compatible pairs (k, l)."""
    n, M = stats1.shape
    best_score = np.full(n, -np.inf)
    best_k = np.zeros(n, dtype=np.int64)
    best_l = np.zeros(n, dtype=np.int64)
    for k in range(M):
        if hi[k] < lo[k]:
            continue
        window = stats2[:, lo[k]:hi[k] + 1]
        arg = np.argmax(window, axis=1)
        score = stats1[:, k] + window[np.arange(n), arg]
        better = score > best_score
        best_score[better] = score[better]
        best_k[better] = k
        best_l[better] = lo[k] + arg[better]
    return best_k, best_l


def _dual_block(cfg: TrialConfig, block: int, n: int, phase_offset: float = 0.0) -> _Tally:
    s: DualSchedule = cfg.schedule
    q = cfg.quantizer
    M = q.size
    lo, hi = search_ranges(q, default_search_theta(cfg), cfg.source.rho)
    rng = make_rng(cfg.seed, block)
    u1, u2 = sample_block(cfg.source, rng, n)
    u1, u2 = u1[:, 0], u2[:, 0]
    m1, m2 = quantize(q, u1), quantize(q, u2)
    tally = _Tally(2, 2)
    energy = np.zeros((n, 2))

    st1 = _data_phase(rng, m1, M, s.ed11, cfg.channel, phase_offset)
    st2 = _data_phase(rng, m2, M, s.ed12, cfg.channel, phase_offset)
    energy[:, 0] += s.ed11
    energy[:, 1] += s.ed12
    k, l = joint_decision(st1, st2, lo, hi)
    w1, w2 = k != m1, l != m2
    tally.reached[0] += n
    tally.errors[0] += int((w1 | w2).sum())
    tally.joint += np.array([(w1 & ~w2).sum(), (~w1 & w2).sum(), (w1 & w2).sum()])

    energy[w1, 0] += s.ec11
    energy[w2, 1] += s.ec12
    d1 = _control_phase(rng, w1, s.ec11, s.lam, cfg.channel)
    d2 = _control_phase(rng, w2, s.ec12, s.lam, cfg.channel)
    tally.uncorrectable[0] += int((w1 & ~d1).sum() + (w2 & ~d2).sum())
    tally.false_alarm[0] += int((~w1 & d1).sum() + (~w2 & d2).sum())

    again = np.nonzero(d1 | d2)[0]
    tally.reached[1] += again.size
    if again.size:
        half = s.ed2 / 2.0
        st1[again] += _data_phase(rng, m1[again], M, half, cfg.channel, phase_offset)
        st2[again] += _data_phase(rng, m2[again], M, half, cfg.channel, phase_offset)
        energy[again] += half
        k2, l2 = joint_decision(st1[again], st2[again], lo, hi)
        k[again], l[again] = k2, l2
        tally.errors[1] += int(((k2 != m1[again]) | (l2 != m2[again])).sum())

    tally.final_errors = int(((k != m1) | (l != m2)).sum())
    sq = np.stack([(u1 - q.levels[k]) ** 2, (u2 - q.levels[l]) ** 2], axis=1)
    tally.add_errors(sq, energy)
    return tally


# ---------------------------------------------------------------------------
# drivers


def _block_sizes(trials: int) -> list[int]:
    full, rest = divmod(trials, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def _run_block(args):
    fn, cfg, b, n, phase = args
    return fn(cfg, b, n, phase)


def _run(fn, cfg: TrialConfig, workers: int, phase_offset: float) -> SimStats:
    jobs = [(fn, cfg, b, n, phase_offset) for b, n in enumerate(_block_sizes(cfg.trials))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, jobs))
    else:
        parts = [_run_block(j) for j in jobs]
    total = parts[0]
    for p in parts[1:]:
        total = total.merge(p)
    return total.finish()


def run_single(cfg: TrialConfig, workers: int = 1, phase_offset: float = 0.0) -> SimStats:
    """Simulate the single-source protocol.

    ``phase_offset`` rotates every received vector by a common phase; the
    square-law receiver must be blind to it.
    """
    if not isinstance(cfg.schedule, EnergySchedule):
        raise DomainError("run_single needs an EnergySchedule")
    if abs(cfg.schedule.n0 - cfg.channel.n0) > 1e-12 * cfg.channel.n0:
        raise DomainError("schedule and channel disagree on n0")
    return _run(_single_block, cfg, workers, phase_offset)


def run_dual(cfg: TrialConfig, workers: int = 1, phase_offset: float = 0.0) -> SimStats:
    """Simulate the two-source protocol with joint detection over compatible pairs.

    A NACK from either source makes both retransmit with half of ``ed2`` each,
    and both messages are decided again jointly.
    """
    if not isinstance(cfg.schedule, DualSchedule):
        raise DomainError("run_dual needs a DualSchedule")
    if cfg.schedule.B != cfg.quantizer.B:
        raise DomainError("schedule and quantizer disagree on B")
    return _run(_dual_block, cfg, workers, phase_offset)


def with_trials(cfg: TrialConfig, trials: int) -> TrialConfig:
    return replace(cfg, trials=trials)
