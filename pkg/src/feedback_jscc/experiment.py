"""Parameter sweeps that turn the analytic bounds and simulations into tables."""

from __future__ import annotations

import dataclasses
import enum
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import __version__
from .errors import ConfigError, DomainError, NonConvergenceError
from .fading import (
    RicianSpec,
    rician_avg_energy,
    rician_distortion_one,
    rician_distortion_two,
    rician_error_probability,
)
from .lower_bounds import BoundQuery, goblick_bound, regime_select, single_split_bound
from .montecarlo import ChannelKind, ChannelSpec, TrialConfig, run_dual, run_single
from .protocol_dual import (
    DualSchedule,
    FirstRoundProbs,
    allocate_dual,
    dual_avg_energy,
    dual_distortion_uniform,
    dual_error_breakdown_uniform,
    dual_pe_uniform,
)
from .protocol_single import (
    EnergySchedule,
    allocate_energies,
    avg_energy,
    distortion_upper,
    one_round_distortion,
    pr_misdetect,
    pr_uncorrectable,
    total_error,
)
from .quantization import QuantizerKind, build_quantizer, cardinality_factor, distortion_terms_uniform
from .sources import Distribution, SourceConfig, SourceModel
from .special import p2_pairwise

COLUMNS = (
    "mode", "B", "rho", "alpha", "lambda", "mu", "e_over_n0_db",
    "bound_lower", "bound_upper_1round", "bound_upper_2round",
    "mc_mse", "mc_stderr", "avg_energy", "retx_rate",
)

DEFAULT_LAMBDA_GRID = tuple(round(0.01 * i, 2) for i in range(1, 100))


class Mode(enum.Enum):
    BOUNDS = "bounds"
    PROTOCOL = "protocol"
    MC = "mc"
    FIGURE = "figure"


class FigureId(enum.Enum):
    NUMERIC1 = "NUMERIC1"  # AWGN, single source, several B
    NUMERIC2 = "NUMERIC2"  # uniform pair, 1 - rho^2 = 2^-2B
    NUMERIC3 = "NUMERIC3"  # Rician, alpha = 0.5
    NUMERIC4 = "NUMERIC4"  # Rician, alpha = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep. Energies are in dB over ``n0`` unless ``linear`` is set.

    ``sources=2`` switches the non-figure modes to the correlated uniform pair,
    in which case the energy is the total over both sources.
    """

    mode: Mode = Mode.BOUNDS
    figure_id: FigureId | None = None
    energy_grid: tuple[float, ...] = tuple(float(x) for x in range(0, 31, 2))
    B: tuple[int, ...] = (4,)
    rho: tuple[float, ...] = (0.0,)
    alpha: float = 0.0
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    mu: float = 1.0
    trials: int = 0
    seed: int = 0
    sources: int = 1
    n0: float = 1.0
    linear: bool = False
    output_path: str | None = None
    workers: int = 1

    def __post_init__(self):
        def bad(field, msg):
            raise ConfigError(msg, field=field)

        if not self.energy_grid:
            bad("energy_grid", "grid must not be empty")
        if not all(math.isfinite(x) for x in self.energy_grid):
            bad("energy_grid", "energy points must be finite")
        if self.linear and any(x <= 0 for x in self.energy_grid):
            bad("energy_grid", "linear energies must be positive")
        if not self.B or any(not 2 <= b <= 16 for b in self.B):
            bad("B", "need at least one B, each in [2, 16]")
        if not self.rho or any(not (math.isfinite(r) and abs(r) <= 1) for r in self.rho):
            bad("rho", "need at least one rho with |rho| <= 1")
        if not 0 <= self.alpha <= 1:
            bad("alpha", "alpha must lie in [0, 1]")
        if not self.lambda_grid or any(not 0 <= x < 1 for x in self.lambda_grid):
            bad("lambda_grid", "need a non-empty grid inside [0, 1)")
        if not 0 < self.mu < 2:
            bad("mu", "mu must lie in (0, 2)")
        if self.trials < 0:
            bad("trials", "trials must be nonnegative")
        if not 0 <= self.seed < 2**64:
            bad("seed", "seed must be an unsigned 64-bit integer")
        if self.sources not in (1, 2):
            bad("sources", "sources must be 1 or 2")
        if self.sources == 2 and self.alpha > 0:
            bad("alpha", "the two-source protocol is only modelled over AWGN")
        if not self.n0 > 0:
            bad("n0", "n0 must be positive")
        if self.mode is Mode.FIGURE and self.figure_id is None:
            bad("figure_id", "figure mode needs a figure id")
        if self.mode is Mode.MC and self.trials < 1:
            bad("trials", "mc mode needs trials >= 1")
        if self.workers < 1:
            bad("workers", "workers must be positive")

    def energies(self) -> list[float]:
        """Linear energy values."""
        if self.linear:
            return list(self.energy_grid)
        return [self.n0 * 10.0 ** (x / 10.0) for x in self.energy_grid]


# ---------------------------------------------------------------------------
# config files

_LIST_FIELDS = {"energy_grid": float, "B": int, "rho": float, "lambda_grid": float}
_SCALAR_FIELDS = {"alpha": float, "mu": float, "trials": int, "seed": int, "sources": int,
                  "n0": float, "workers": int}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_value(key: str, text: str):
    if key in _LIST_FIELDS:
        conv = _LIST_FIELDS[key]
        parts = [p.strip() for p in text.split(",") if p.strip()]
        return tuple(conv(p) for p in parts)
    if key in _SCALAR_FIELDS:
        return _SCALAR_FIELDS[key](text)
    if key == "mode":
        return Mode(text.strip().lower())
    if key == "figure_id":
        return FigureId(text.strip().upper())
    if key == "linear":
        return _parse_bool(text)
    if key == "output_path":
        return text.strip() or None
    raise KeyError(key)


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines into overrides for :class:`ExperimentConfig`."""
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    out: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError("unknown key", line=lineno, field=key)
        if key in out:
            raise ConfigError("duplicate key", line=lineno, field=key)
        try:
            out[key] = _parse_value(key, value)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"cannot parse {value!r} ({exc})", line=lineno, field=key) from None
        lines[key] = lineno
    out["__lines__"] = lines
    return out


def build_config(overrides: dict) -> ExperimentConfig:
    """Create a config, mapping validation errors back to file lines when known."""
    overrides = dict(overrides)
    lines = overrides.pop("__lines__", {})
    try:
        return ExperimentConfig(**overrides)
    except ConfigError as exc:
        if exc.line is None and exc.field in lines:
            raise ConfigError(str(exc).split(": ", 1)[-1], line=lines[exc.field], field=exc.field) from None
        raise


def figure_defaults(fig: FigureId) -> dict:
    """Parameterization of the published figures."""
    grid = tuple(float(x) for x in range(0, 31, 2))
    if fig is FigureId.NUMERIC1:
        return dict(B=(2, 4, 6, 8), energy_grid=grid, alpha=0.0, sources=1)
    if fig is FigureId.NUMERIC2:
        return dict(B=(2, 3, 4, 5), energy_grid=grid, alpha=0.0, sources=2)
    alpha = 0.5 if fig is FigureId.NUMERIC3 else 0.1
    return dict(B=(2, 4, 6, 8), energy_grid=grid, alpha=alpha, sources=1)


def paired_rho(B: int) -> float:
    """Correlation with 1 - rho^2 = 2^-2B."""
    return math.sqrt(1.0 - 2.0 ** (-2 * B))


# ---------------------------------------------------------------------------
# lambda search


def optimize_lambda(grid: Sequence[float], objective: Callable[[float], float]) -> tuple[float, float]:
    """Exhaustive grid minimization; the first minimizer wins ties."""
    if len(grid) == 0:
        raise DomainError("lambda grid must not be empty")
    best_lam, best_val = None, math.inf
    for lam in grid:
        val = objective(lam)
        if val < best_val or best_lam is None:
            best_lam, best_val = lam, val
    return best_lam, best_val


def _solve_first_round(target: float, energy_of: Callable[[float], float], expansion: float,
                       hint: float | None = None) -> float:
    """First-round energy giving the requested average energy.

    ``expansion`` bounds avg/ed1 from above, which brackets the root. A
    ``hint`` (e.g. the solution for a neighbouring lambda) is tried first with
    a narrow bracket.
    """
    f = lambda x: energy_of(x) - target
    brackets = []
    if hint is not None and target / expansion < hint <= target:
        brackets.append((max(target / expansion, hint * 0.97), min(target, hint * 1.03)))
    brackets.append((target / expansion, target))
    for lo, hi in brackets:
        f_lo, f_hi = f(lo), f(hi)
        if f_lo == 0:
            return lo
        if f_hi == 0:
            return hi
        if f_lo > 0 or f_hi < 0:
            continue
        try:
            root, info = optimize.brentq(f, lo, hi, xtol=1e-12 * target, rtol=1e-12,
                                         full_output=True, disp=False)
        except ValueError as exc:  # NaN objective
            raise NonConvergenceError(f"first-round energy search failed: {exc}") from exc
        if not info.converged:
            raise NonConvergenceError("first-round energy search did not converge")
        return root
    raise NonConvergenceError("average energy not bracketed")


def single_schedule_at_energy(B: int, target: float, mu: float, lam: float, n0: float = 1.0,
                              alpha: float = 0.0, hint: float | None = None) -> EnergySchedule:
    """Two-round allocation whose expected energy equals ``target``.

    The expectation uses the exact first-round error probability.
    """
    expansion = 1.0 + (2.0 - mu) * (1.0 + 1.0 / (2.0 * (1.0 - math.sqrt(lam)) ** 2))
    spec = RicianSpec(alpha, n0)

    def energy_of(ed1: float) -> float:
        s = allocate_energies(2, ed1, mu, lam, n0)
        if alpha > 0:
            return rician_avg_energy(B, s, spec)
        return avg_energy(B, s, exact_round_error_prob=True)

    return allocate_energies(2, _solve_first_round(target, energy_of, expansion, hint), mu, lam, n0)


def two_round_distortion(B: int, sched: EnergySchedule, alpha: float = 0.0) -> float:
    if alpha > 0:
        return rician_distortion_two(B, sched, RicianSpec(alpha, sched.n0))
    return distortion_upper(B, sched).distortion


def two_round_error(B: int, sched: EnergySchedule, alpha: float = 0.0) -> float:
    """Final error probability behind :func:`two_round_distortion`.

    The distortion is the quantization floor plus a multiple of this, so both
    have the same minimizer; this one keeps its resolution once the floor
    dominates in floating point.
    """
    if alpha > 0:
        return rician_error_probability(B, sched, RicianSpec(alpha, sched.n0))
    return total_error(B, sched)


def min_distortion_at_energy(B: int, e_avg: float, mu: float = 1.0, n0: float = 1.0,
                             grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
                             alpha: float = 0.0) -> tuple[float, float, EnergySchedule]:
    """Best two-round bound at a fixed average energy: (lambda*, distortion, schedule)."""

    schedules: dict[float, EnergySchedule] = {}
    hint = [None]

    def objective(lam: float) -> float:
        s = single_schedule_at_energy(B, e_avg, mu, lam, n0, alpha, hint[0])
        schedules[lam], hint[0] = s, s.ed[0]
        return two_round_error(B, s, alpha)

    lam, _ = optimize_lambda(grid, objective)
    return lam, two_round_distortion(B, schedules[lam], alpha), schedules[lam]


def dual_first_round_probs(s: DualSchedule) -> FirstRoundProbs:
    """Union-bound first-round outcome probabilities for the uniform pair."""
    b = dual_error_breakdown_uniform(s)
    p_one = min(0.5, b.one_first)
    p_both = min(1.0 - 2 * p_one, b.both_first)
    pec = pr_uncorrectable(s.ec11, s.n0, s.lam)
    pce = pr_misdetect(s.ec11, s.n0, s.lam)
    return FirstRoundProbs(p_one, p_one, p_both, pec, pec, pce, pce)


def dual_schedule_at_energy(B: int, rho: float, target: float, mu: float, lam: float,
                            n0: float = 1.0) -> DualSchedule:
    """Pair schedule whose bounded average energy (both sources) equals ``target``."""
    gap = (1.0 - math.sqrt(lam)) ** 2
    expansion = 1.0 + (2.0 - mu) * (2.0 + 1.0 / gap)

    def make(ed1: float) -> DualSchedule:
        return allocate_dual(ed1, mu, lam, B=B, rho=rho, n0=n0)

    def energy_of(ed1: float) -> float:
        s = make(ed1)
        return dual_avg_energy(s, dual_first_round_probs(s))[1]

    return make(_solve_first_round(target, energy_of, expansion))


def dual_one_round_distortion(B: int, rho: float, e: float, n0: float = 1.0) -> float:
    """Pair distortion (sum over sources) when the protocol stops after one round."""
    terms = distortion_terms_uniform(B, rho)
    n_near = cardinality_factor(B, math.sqrt(max(0.0, 1.0 - rho * rho)))
    p1 = min(1.0, n_near * p2_pairwise(1, e / (2.0 * n0)))
    p2 = min(1.0, n_near * 2.0**B * p2_pairwise(2, e / n0))
    return terms.d_q + terms.d_e1 * p1 + terms.d_e2 * p2


def min_dual_distortion_at_energy(B: int, rho: float, e_avg: float, mu: float = 1.0, n0: float = 1.0,
                                  grid: Sequence[float] = DEFAULT_LAMBDA_GRID):
    terms = distortion_terms_uniform(B, rho)

    def objective(lam: float) -> float:
        # error part only; the quantization floor would swamp it
        p_e1, p_e2 = dual_pe_uniform(dual_schedule_at_energy(B, rho, e_avg, mu, lam, n0))
        return terms.d_e1 * p_e1 + terms.d_e2 * p_e2

    lam, _ = optimize_lambda(grid, objective)
    sched = dual_schedule_at_energy(B, rho, e_avg, mu, lam, n0)
    return lam, dual_distortion_uniform(sched), sched


def dual_lower_bound(rho: float, e_total: float, n0: float, d_other: tuple[float, float]) -> float:
    """Sum over sources of the regime-selected bound with an even energy split."""
    q = BoundQuery(Distribution.UNIFORM, rho=rho, e1=e_total / 2, e2=e_total / 2, n0=n0)
    return regime_select(q, 1, d_other[1]).value + regime_select(q, 2, d_other[0]).value


# ---------------------------------------------------------------------------
# rows


@dataclass(frozen=True)
class _Point:
    B: int
    rho: float
    energy: float
    e_db: float
    index: tuple[int, int, int]


def _point_seed(seed: int, index: tuple[int, ...]) -> int:
    state = np.random.SeedSequence(entropy=seed, spawn_key=index).generate_state(2, dtype=np.uint64)
    return int(state[0]) << 64 | int(state[1])


def _empty_row(cfg: ExperimentConfig, p: _Point, rho) -> dict:
    row = dict.fromkeys(COLUMNS)
    row.update(mode=cfg.mode.value, B=p.B, rho=rho, alpha=cfg.alpha, mu=cfg.mu, e_over_n0_db=p.e_db)
    return row


def _single_rows(cfg: ExperimentConfig, p: _Point) -> list[dict]:
    n0, alpha = cfg.n0, cfg.alpha
    spec = RicianSpec(alpha, n0)
    is_fig1 = cfg.figure_id is FigureId.NUMERIC1

    def lower(e: float) -> float:
        if is_fig1:
            return goblick_bound(e, n0)
        return single_split_bound(BoundQuery(Distribution.UNIFORM, e1=e, n0=n0)).value

    def upper1(e: float) -> float:
        return rician_distortion_one(p.B, e, spec) if alpha > 0 else one_round_distortion(p.B, e, n0)

    rows = []
    if cfg.mode is Mode.PROTOCOL:
        # energy axis is the first-round data energy; one row per lambda
        for lam in cfg.lambda_grid:
            s = allocate_energies(2, p.energy, cfg.mu, lam, n0)
            e_avg = rician_avg_energy(p.B, s, spec) if alpha > 0 else avg_energy(p.B, s, True)
            row = _empty_row(cfg, p, None)
            row.update({"lambda": lam, "bound_lower": lower(e_avg), "bound_upper_1round": upper1(e_avg),
                        "bound_upper_2round": two_round_distortion(p.B, s, alpha), "avg_energy": e_avg})
            rows.append(row)
        return rows

    lam, d2, sched = min_distortion_at_energy(p.B, p.energy, cfg.mu, n0, cfg.lambda_grid, alpha)
    row = _empty_row(cfg, p, None)
    row.update({"lambda": lam, "bound_lower": lower(p.energy), "bound_upper_1round": upper1(p.energy),
                "bound_upper_2round": d2, "avg_energy": p.energy})
    if cfg.trials > 0:
        kind = ChannelKind.RICIAN if alpha > 0 else ChannelKind.AWGN_NONCOHERENT
        tc = TrialConfig(SourceConfig(), build_quantizer(QuantizerKind.UNIFORM, p.B), sched,
                         ChannelSpec(kind, alpha, n0), cfg.trials, _point_seed(cfg.seed, p.index))
        st = run_single(tc)
        row.update(mc_mse=st.empirical_mse, mc_stderr=st.mse_stderr,
                   avg_energy=st.measured_avg_energy, retx_rate=st.retransmission_rate)
    return [row]


def _dual_rows(cfg: ExperimentConfig, p: _Point) -> list[dict]:
    n0, rho = cfg.n0, p.rho
    rows = []
    if cfg.mode is Mode.PROTOCOL:
        for lam in cfg.lambda_grid:
            s = allocate_dual(p.energy, cfg.mu, lam, B=p.B, rho=rho, n0=n0)
            e_avg = dual_avg_energy(s, dual_first_round_probs(s))[1]
            d2 = dual_distortion_uniform(s)
            row = _empty_row(cfg, p, rho)
            row.update({"lambda": lam, "bound_lower": dual_lower_bound(rho, e_avg, n0, (d2 / 2, d2 / 2)),
                        "bound_upper_1round": dual_one_round_distortion(p.B, rho, e_avg, n0),
                        "bound_upper_2round": d2, "avg_energy": e_avg})
            rows.append(row)
        return rows

    lam, d2, sched = min_dual_distortion_at_energy(p.B, rho, p.energy, cfg.mu, n0, cfg.lambda_grid)
    d_other = (d2 / 2, d2 / 2)
    row = _empty_row(cfg, p, rho)
    row.update({"lambda": lam, "bound_upper_1round": dual_one_round_distortion(p.B, rho, p.energy, n0),
                "bound_upper_2round": d2, "avg_energy": p.energy})
    if cfg.trials > 0:
        tc = TrialConfig(SourceConfig(SourceModel.MODEL_I, Distribution.UNIFORM, rho),
                         build_quantizer(QuantizerKind.UNIFORM_TAILS, p.B, rho), sched,
                         ChannelSpec(n0=n0), cfg.trials, _point_seed(cfg.seed, p.index))
        st = run_dual(tc)
        d_other = st.per_source_mse
        row.update(mc_mse=st.empirical_mse, mc_stderr=st.mse_stderr,
                   avg_energy=st.measured_avg_energy, retx_rate=st.retransmission_rate)
    row["bound_lower"] = dual_lower_bound(rho, p.energy, n0, d_other)
    return [row]


def _rows_for_point(args) -> list[dict]:
    cfg, p = args
    return _dual_rows(cfg, p) if cfg.sources == 2 else _single_rows(cfg, p)


def resolve(cfg: ExperimentConfig, explicit: set[str] = frozenset()) -> ExperimentConfig:
    """Apply figure presets for every field the user did not set explicitly."""
    if cfg.mode is not Mode.FIGURE:
        return cfg
    preset = {k: v for k, v in figure_defaults(cfg.figure_id).items() if k not in explicit}
    return dataclasses.replace(cfg, **preset)


def _points(cfg: ExperimentConfig) -> list[_Point]:
    pts = []
    energies = cfg.energies()
    for bi, B in enumerate(cfg.B):
        rhos = [paired_rho(B)] if cfg.figure_id is FigureId.NUMERIC2 else list(cfg.rho)
        if cfg.sources == 1:
            rhos = rhos[:1]
        for ri, rho in enumerate(rhos):
            for ei, e in enumerate(energies):
                e_db = 10.0 * math.log10(e / cfg.n0) if cfg.linear else float(cfg.energy_grid[ei])
                pts.append(_Point(B, rho, e, e_db, (bi, ri, ei)))
    return pts


def _sort_key(row: dict):
    rho = row["rho"] if row["rho"] is not None else -math.inf
    return (row["mode"], row["B"], rho, row["e_over_n0_db"])


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """All rows of a sweep, sorted by (mode, B, rho, e_over_n0_db)."""
    jobs = [(cfg, p) for p in _points(cfg)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_rows_for_point, jobs))
    else:
        parts = [_rows_for_point(j) for j in jobs]
    rows = [r for part in parts for r in part]
    rows.sort(key=_sort_key)  # stable: lambda order survives within a point
    return rows


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


# execution details that never change the table
_UNRECORDED = frozenset({"output_path", "workers"})


def _config_items(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    items = []
    for f in dataclasses.fields(cfg):
        if f.name in _UNRECORDED:
            continue
        v = getattr(cfg, f.name)
        if isinstance(v, enum.Enum):
            v = v.value
        elif isinstance(v, tuple):
            v = ",".join(_fmt(x) for x in v)
        items.append((f.name, _fmt(v)))
    return items


def render(cfg: ExperimentConfig, rows: list[dict], fmt: str = "csv") -> str:
    buf = io.StringIO()
    if fmt == "csv":
        buf.write(f"# feedback_jscc {__version__}\n")
        for k, v in _config_items(cfg):
            buf.write(f"# {k}={v}\n")
        buf.write(",".join(COLUMNS) + "\n")
        for r in rows:
            buf.write(",".join(_fmt(r[c]) for c in COLUMNS) + "\n")
    elif fmt == "jsonl":
        meta = {"version": __version__, "config": dict(_config_items(cfg)), "columns": list(COLUMNS)}
        buf.write(json.dumps(meta, sort_keys=True) + "\n")
        for r in rows:
            buf.write(json.dumps({c: r[c] for c in COLUMNS}) + "\n")
    else:
        raise ConfigError(f"unknown format {fmt!r}", field="format")
    return buf.getvalue()
