"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
"""

import csv
import io
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import optimize

from feedback_jscc.cli import main
from feedback_jscc.experiment import (
    dual_lower_bound,
    min_distortion_at_energy,
    min_dual_distortion_at_energy,
)
from feedback_jscc.fading import RicianSpec, rician_uncorrectable
from feedback_jscc.lower_bounds import (
    BoundQuery,
    goblick_bound,
    low_constant,
    single_split_bound,
)
from feedback_jscc.montecarlo import ChannelSpec, TrialConfig, run_dual, run_single
from feedback_jscc.protocol_single import (
    allocate_energies,
    avg_energy,
    fitted_slope,
    one_round_distortion,
    pr_round_error,
    pr_uncorrectable,
)
from feedback_jscc.quantization import QuantizerKind, build_quantizer
from feedback_jscc.sources import Distribution, SourceConfig, SourceModel
from feedback_jscc.special import marcum_q1, rician_pm


def db(x):
    return 10 ** (x / 10)


def test_criterion_1_special_identities(acceptance):
    t0 = time.perf_counter()
    worst_q = 0.0
    for a in np.linspace(0, 12, 13):
        worst_q = max(worst_q, abs(marcum_q1(float(a), 0.0) - 1.0))
    for b in np.linspace(0, 12, 25):
        worst_q = max(worst_q, abs(marcum_q1(0.0, float(b)) - math.exp(-b * b / 2)))
    worst_p = max(abs(rician_pm(2, 1, float(g), 0.0) - 0.5 * math.exp(-g / 2)) for g in range(0, 21, 2))
    elapsed = time.perf_counter() - t0
    ok = worst_q <= 1e-9 and worst_p <= 1e-6 and elapsed < 5
    assert acceptance(1, ok, f"max |Q1 err|={worst_q:.1e}, max |P_M err|={worst_p:.1e}, {elapsed:.2f}s")


def _mary_error_rate(M, gamma, n, rng, chunk=100_000):
    errors = 0
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        y = (rng.standard_normal((m, M)) + 1j * rng.standard_normal((m, M))) / math.sqrt(2)
        y[:, 0] += math.sqrt(gamma) * np.exp(1j * rng.uniform(0, 2 * np.pi, m))
        errors += int(np.count_nonzero(np.argmax(np.abs(y) ** 2, axis=1)))
    return errors / n


def test_criterion_2_pairwise_sandwich(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    n = 1_000_000
    ok, worst = True, []
    for B in (2, 4):
        for g in (4.0, 8.0, 12.0):
            p = _mary_error_rate(1 << B, g, n, rng)
            sigma = math.sqrt(p * (1 - p) / n)
            union, exact = pr_round_error(B, g, 1), rician_pm(1 << B, 1, g, 0.0)
            ok &= p <= union + 3 * sigma and p >= exact - 3 * sigma
            worst.append(abs(p - exact) / sigma)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    assert acceptance(2, ok, f"max |MC - exact|/sigma={max(worst):.2f}, {elapsed:.1f}s")


def test_criterion_3_energy_accounting(acceptance):
    B, details, ok = 4, [], True
    for ed1 in (8.0, 12.0, 16.0):
        s = allocate_energies(2, ed1, 1.0, 0.25)
        cfg = TrialConfig(SourceConfig(), build_quantizer(QuantizerKind.UNIFORM, B), s,
                          ChannelSpec(), 100_000, seed=int(ed1))
        st = run_single(cfg)
        closed = avg_energy(B, s, exact_round_error_prob=True)
        z = (st.measured_avg_energy - closed) / st.energy_stderr
        ok &= abs(z) <= 3
        details.append(f"E_D1={ed1:g}: z={z:+.2f}")
    s = allocate_energies(2, 25.0, 1.0, 0.25)
    rel = avg_energy(B, s, exact_round_error_prob=True) / 25.0 - 1
    ok &= rel < 0.01
    assert acceptance(3, ok, ", ".join(details) + f", excess at 25: {rel:.1e}")


def test_criterion_4_rate_exponents(acceptance):
    t0 = time.perf_counter()
    two = {mu: fitted_slope(2, mu) for mu in (0.5, 1.0)}
    three = fitted_slope(3, 0.5)
    ok_two = all(abs(two[mu] / -(1 + mu / 3) - 1) <= 0.05 for mu in two)
    ok_three = abs(three / -(1 - 2 * 0.5 / 3) - 1) <= 0.05
    elapsed = time.perf_counter() - t0
    ok = ok_two and ok_three and elapsed < 10
    detail = (f"two-round slopes {two[0.5]:.3f} (mu=0.5, target {-(1 + 0.5 / 3):.3f}), "
              f"{two[1.0]:.3f} (mu=1, target {-(1 + 1 / 3):.3f}); "
              f"three-round {three:.3f} (target {-(1 - 1 / 3):.3f})")
    assert acceptance(4, ok, detail)


def _energy_db_for(distortion_of, target):
    f = lambda x: math.log(distortion_of(db(x))) - math.log(target)
    return optimize.brentq(f, 0.0, 40.0, xtol=1e-4)


def test_criterion_5_feedback_gain(acceptance):
    B, target = 6, 1e-3
    two = _energy_db_for(lambda e: min_distortion_at_energy(B, e)[1], target)
    one = _energy_db_for(lambda e: one_round_distortion(B, e), target)
    gain = one - two
    assert acceptance(5, 2.0 <= gain <= 4.0, f"1-round {one:.2f} dB, 2-round {two:.2f} dB, gain {gain:.2f} dB")


def test_criterion_6_sandwich(acceptance):
    t0 = time.perf_counter()
    ok, worst = True, 0.0
    for B in (4, 6):
        q = build_quantizer(QuantizerKind.UNIFORM, B)
        for x in (10.0, 15.0, 20.0):
            _, upper, sched = min_distortion_at_energy(B, db(x))
            st = run_single(TrialConfig(SourceConfig(), q, sched, ChannelSpec(), 100_000, seed=B * 100 + int(x)))
            lower = goblick_bound(st.measured_avg_energy, 1.0)
            sig = st.mse_stderr
            ok &= lower - 3 * sig <= st.empirical_mse <= upper + 3 * sig
            worst = max(worst, (st.empirical_mse - upper) / sig)
    rho, B = 0.99, 4
    dual_ok = True
    for x in (10.0, 15.0, 20.0):
        _, upper, sched = min_dual_distortion_at_energy(B, rho, db(x))
        cfg = TrialConfig(SourceConfig(SourceModel.MODEL_I, Distribution.UNIFORM, rho),
                          build_quantizer(QuantizerKind.UNIFORM_TAILS, B, rho), sched, ChannelSpec(),
                          100_000, seed=7000 + int(x))
        st = run_dual(cfg)
        lower = dual_lower_bound(rho, st.measured_avg_energy, 1.0, st.per_source_mse)
        sig = st.mse_stderr
        dual_ok &= lower - 3 * sig <= st.empirical_mse <= upper + 3 * sig
    elapsed = time.perf_counter() - t0
    ok = ok and dual_ok and elapsed < 600
    assert acceptance(6, ok, f"single max (MC-upper)/sigma={worst:.1f}, dual inside={dual_ok}, {elapsed:.0f}s")


def test_criterion_7_lower_bound_constants(acceptance):
    c_single = single_split_bound(BoundQuery(Distribution.UNIFORM, e1=0.0)).value
    err = abs(c_single - 6 / (math.pi * math.e))
    for rho in (0.0, 0.3, 0.9, 0.999):
        expected = 36 * (1 - rho * rho) / (math.pi**2 * math.e**2)
        err = max(err, abs(low_constant(Distribution.UNIFORM, 1, rho) - expected))
    assert acceptance(7, err <= 1e-12, f"max abs deviation {err:.1e}")


def _figure_rows(tmp_path, figure, cfg_text, extra=()):
    cfg = tmp_path / f"{figure}.cfg"
    cfg.write_text(cfg_text)
    out = tmp_path / f"{figure}.csv"
    assert main(["figure", figure, "--config", str(cfg), "--out", str(out), *extra]) == 0
    text = out.read_text()
    return list(csv.DictReader(io.StringIO("".join(l for l in text.splitlines(True) if not l.startswith("#")))))


def test_criterion_8_rician_continuity(acceptance, tmp_path):
    dev = 0.0
    for ec in (0.5, 2.0, 8.0, 20.0):
        for lam in (0.1, 0.25, 0.5):
            dev = max(dev, abs(rician_uncorrectable(ec, RicianSpec(1e-6), lam) - pr_uncorrectable(ec, 1.0, lam)))
    for M in (2, 16, 64):
        for g in (2.0, 10.0, 25.0):
            dev = max(dev, abs(rician_pm(M, 1, g, 1e-6) - rician_pm(M, 1, g, 0.0)))
    checked, diverse = 0, True
    for figure in ("NUMERIC3", "NUMERIC4"):
        for row in _figure_rows(tmp_path, figure, "energy_grid = 20, 25, 30\n"):
            if float(row["e_over_n0_db"]) >= 20:
                checked += 1
                diverse &= float(row["bound_upper_2round"]) < float(row["bound_upper_1round"])
    ok = dev <= 1e-4 and diverse and checked > 0
    assert acceptance(8, ok, f"max continuity deviation {dev:.1e}, 2-round < 1-round at {checked} points: {diverse}")


def test_criterion_9_reproducible_figures(acceptance, tmp_path):
    cfg = tmp_path / "fig.cfg"
    cfg.write_text("energy_grid = 10, 20\n")
    runs = []
    for i in range(2):
        out = tmp_path / f"run{i}.csv"
        assert main(["figure", "NUMERIC2", "--trials", "3000", "--seed", "99",
                     "--config", str(cfg), "--out", str(out)]) == 0
        runs.append(out.read_bytes())
    fresh = subprocess.run([sys.executable, "-m", "feedback_jscc", "figure", "NUMERIC2", "--trials", "3000",
                            "--seed", "99", "--config", str(cfg)], capture_output=True, check=True).stdout
    same = runs[0] == runs[1] == fresh
    assert acceptance(9, same, f"{len(runs[0])} bytes, in-process and subprocess runs identical: {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
