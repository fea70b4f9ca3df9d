"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the summary lines
interleaved with pytest's own output (they are printed even without ``-s``).
"""

import math
import time

import numpy as np
import pytest

from bdcdme import runner
from bdcdme.cdme import cdme_residual, cme_reference
from bdcdme.cli import EXIT_OK, main
from bdcdme.config import load_config
from bdcdme.genfunc import GenSolution, identity_suite
from bdcdme.output import read_csv
from bdcdme.particles import compare_stats, run_ensemble

SAMPLE_T = (0.25, 0.5, 1.0, 2.0, 4.0)
SAMPLE_X = (0.1, 0.3, 0.5, 0.7, 0.9)


def verdict(capsys, number, title, checks, elapsed=None, limit=None):
    """Print one summary line and fail with the first failing check."""
    if limit is not None:
        checks = list(checks) + [(elapsed < limit, f"runtime {elapsed:.1f}s < {limit:g}s")]
    failed = [d for ok, d in checks if not ok]
    status = "PASS" if not failed else "FAIL"
    tail = f" ({elapsed:.1f}s)" if elapsed is not None else ""
    with capsys.disabled():
        print(f"\n[criterion {number}] {status}: {title}{tail}" + (f" -- {failed[0]}" if failed else ""))
    assert not failed, "; ".join(failed)


def model_for(name, **overrides):
    return runner.build_model(load_config(scenario=name, overrides=overrides or None))


def test_constant_scenario(capsys):
    start = time.perf_counter()
    dist = model_for("constant").dist
    t = np.linspace(0.0, 10.0, 1001)
    rho0 = np.array([dist.rho0(s) for s in t])
    err0 = np.max(np.abs(rho0 - np.exp(-(1 - np.exp(-0.5 * t)))))
    limit = abs(dist.rho0(60.0) - math.exp(-1))
    grid = dist.solution.grid
    spread = max(np.ptp(dist.rho_n(s, grid[:, None])) for s in (0.01, 0.25, 1.0, 4.0, 10.0))
    elapsed = time.perf_counter() - start
    verdict(capsys, 1, "constant scenario closed forms", [
        (err0 <= 1e-10, f"rho0 max error {err0:.2e} > 1e-10"),
        (limit <= 1e-6, f"rho0(inf) off e^-1 by {limit:.2e}"),
        (spread <= 1e-12, f"rho1 spread {spread:.2e} > 1e-12"),
    ], elapsed, 5)


def test_cme_correspondence(capsys):
    dist = model_for("constant").dist
    start = time.perf_counter()
    worst = 0.0
    for t in (0.1, 0.5, 1.0, 2.0, 5.0):
        pmf = dist.count_pmf(t, n_max=30).pmf
        ref = np.array([cme_reference(0.5, 0.5, t, n) for n in range(31)])
        worst = max(worst, float(np.max(np.abs(pmf - ref))))
    elapsed = time.perf_counter() - start
    verdict(capsys, 2, "count pmf equals the well-mixed CME solution",
            [(worst <= 1e-10, f"max pmf difference {worst:.2e}")], elapsed, 1)


def test_cdme_residual(capsys):
    start = time.perf_counter()
    checks = []
    for name in ("constant", "smooth"):
        model = model_for(name)
        worst = 0.0
        for t in SAMPLE_T:
            for i, x in enumerate(SAMPLE_X):
                pair = (x, SAMPLE_X[(i + 2) % 5])
                for n, pts in ((0, ()), (1, (x,)), (2, pair)):
                    r = cdme_residual(model.dist, model.lambda_c, model.lambda_d, n, t, pts)
                    worst = max(worst, r)
        checks.append((worst <= 1e-4, f"{name}: max residual {worst:.2e}"))
    elapsed = time.perf_counter() - start
    verdict(capsys, 3, "CDME residual n = 0, 1, 2 on a 5x5 sample", checks, elapsed, 30)


def test_spectral_fd_equivalence(capsys):
    start = time.perf_counter()
    checks = []
    cfg = load_config(scenario="smooth")
    ((_, dist),) = runner.fd_agreement(cfg, runner.build_model(cfg))
    checks.append((dist <= 1e-5, f"smooth L-inf {dist:.2e} > 1e-5"))
    for name in ("dirac0", "dirac-half"):
        cfg = load_config(scenario=name)
        rows = runner.fd_agreement(cfg, runner.build_model(cfg))
        widths = [w for w, _ in rows]
        dists = [d for _, d in rows]
        assert widths == sorted(widths, reverse=True)
        ok = all(a > b for a, b in zip(dists, dists[1:]))
        checks.append((ok, f"{name}: distances not decreasing with width: {dists}"))
    elapsed = time.perf_counter() - start
    verdict(capsys, 4, "spectral and finite-difference solutions agree", checks, elapsed, 60)


def test_generating_function(capsys):
    start = time.perf_counter()
    checks = []
    model = model_for("dirac0")
    gen = model.gen()
    report = identity_suite(gen, np.linspace(0.0, 10.0, 101), strict=False)
    checks.append((report.g_passed, f"g-identity {report.g_identity_max:.2e}"))
    checks.append((report.gamma_passed, f"gamma-identity {report.gamma_identity:.2e}"))
    for name in ("constant", "dirac0", "dirac-half"):
        m = model_for(name)
        g = m.gen()
        dev = max(abs(g.rho0_truncated(t) - m.dist.rho0(t)) for t in np.linspace(0.0, 4.0, 41))
        checks.append((dev <= 1e-8, f"{name}: rho0 routes differ by {dev:.2e}"))
    for n in (1, 2, 3):
        small = GenSolution.from_projection(model.proj, model.lambda_d, n_modes=n)
        for t, z in ((0.5, np.zeros(n)), (1.0, np.full(n, 0.3))):
            est, se = small.u_feynman_kac_mc(t, z, paths=100_000, seed=n)
            exact = small.u_closed_form(t, z)
            checks.append((abs(est - exact) <= 3 * se, f"N={n} t={t}: MC {est:.5f}+-{se:.1e} vs {exact:.5f}"))
    small = GenSolution.from_projection(model.proj, model.lambda_d, n_modes=3)
    draws = np.random.default_rng(2024).standard_normal((1_000_000, 3))
    vals = small.u_closed_form(1.0, draws)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    exact = small.gaussian_expectation(1.0)
    checks.append((abs(vals.mean() - exact) <= 3 * se, f"E_Z[u]: {vals.mean():.6f}+-{se:.1e} vs {exact:.6f}"))
    elapsed = time.perf_counter() - start
    verdict(capsys, 5, "generating-function machinery", checks, elapsed, 90)


def test_particle_simulation(capsys):
    start = time.perf_counter()
    checks = []
    expected_mode = {"dirac0": 0, "dirac-half": 2}
    for name in ("constant", "dirac0", "dirac-half"):
        cfg = load_config(scenario=name, overrides={"simulation": {"snapshots": [0.25, 1.0, 4.0]}})
        lc, ld = runner.build_rates(cfg)
        stats = run_ensemble(runner.sim_config(cfg, lc, ld), threads=4)
        assert stats.trajectories == 10_000
        report = compare_stats(stats, runner.build_model(cfg).dist)
        for s in report.snapshots:
            checks.append((s.tv <= 0.02, f"{name} t={s.t:g}: TV {s.tv:.4f}"))
            checks.append((s.p_value > 1e-3, f"{name} t={s.t:g}: chi-square p {s.p_value:.2e}"))
        if name in expected_mode:
            mode = runner.coarse_mode(stats, 0, cfg["simulation"]["mode_bins"])
            checks.append((mode == expected_mode[name], f"{name}: histogram mode bin {mode}"))
            if name == "dirac0":
                fine = int(np.argmax(stats.histograms[0]))
                checks.append((fine == 0, f"dirac0: 50-bin mode {fine}"))
    elapsed = time.perf_counter() - start
    verdict(capsys, 6, "particle simulation matches the Poisson field", checks, elapsed, 180)


def _surface_argmax(path):
    _, header, rows = read_csv(path)
    arr = np.array(rows, dtype=float)
    return tuple(arr[np.argmax(arr[:, header.index("rho2")]), :2])


def _normalised_peaks(path):
    _, _, rows = read_csv(path)
    arr = np.array(rows, dtype=float)
    times = np.unique(arr[:, 0])
    times = times[times > 0]
    return [arr[arr[:, 0] == t, 2].max() / arr[arr[:, 0] == t, 2].mean() for t in times]


def test_figure_shapes(tmp_path, capsys):
    start = time.perf_counter()
    checks = []
    for name, peak in (("dirac0", (0.0, 0.0)), ("dirac-half", (0.5, 0.5))):
        out = tmp_path / name
        assert main(["solve", "--scenario", name, "--out", str(out)]) == EXIT_OK
        where = _surface_argmax(out / "rho2_surface.csv")
        checks.append((np.allclose(where, peak), f"{name}: rho2 maximal at {where}"))
        peaks = _normalised_peaks(out / "rho1.csv")
        ok = all(a > b for a, b in zip(peaks, peaks[1:]))
        checks.append((ok, f"{name}: rho1 peak prominence not decreasing"))
    elapsed = time.perf_counter() - start
    verdict(capsys, 7, "figure shapes (rho2 peaks, smoothing of rho1)", checks, elapsed)


def test_simulation_determinism(tmp_path, capsys):
    start = time.perf_counter()
    runs = []
    for run in ("first", "second"):
        out = tmp_path / run
        assert main(["simulate", "--scenario", "dirac0", "--seed", "42", "--out", str(out)]) == EXIT_OK
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = runs[0] == runs[1] and len(runs[0]) == 3
    elapsed = time.perf_counter() - start
    verdict(capsys, 8, "simulate is byte-for-byte reproducible",
            [(same, "outputs differ between runs")], elapsed)
