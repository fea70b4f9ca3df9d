"""Wiring from a resolved run configuration to solvers, checks and CSV files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import output
from .basis import build_cosine_basis, build_numeric_basis, cosine_rate, spectral_projection
from .cdme import CdmeDistribution, cdme_residual, cme_reference
from .config import config_hash
from .genfunc import GenSolution, identity_suite
from .grid import trapezoid, uniform_grid
from .particles import SimConfig, compare_stats, run_ensemble
from .pde import pde_residual, solve_crank_nicolson, solve_spectral
from .rates import ConstantRate, DiracRate, TabulatedRate, mollify

RESIDUAL_TIMES = (0.25, 0.5, 1.0, 2.0, 4.0)
RESIDUAL_X = (0.1, 0.3, 0.5, 0.7, 0.9)
MOLLIFY_WIDTHS = (1e-2, 3e-3, 1e-3)
ATOM_EXCLUSION = 0.05
# grid solvers cannot resolve the first few steps of a spreading atom
ATOM_MIN_TIME = 0.05
CONVERGENCE_N = (25, 50, 100, 200, 400, 800)


def build_rate(spec, m=2001):
    kind = spec["kind"]
    if kind == "constant":
        return ConstantRate(float(spec["value"]))
    if kind == "dirac":
        return DiracRate(float(spec["location"]), float(spec["mass"]))
    if kind == "tabulated":
        return TabulatedRate.from_csv(spec["path"])
    if kind == "cosine":
        return cosine_rate(float(spec["mean"]), float(spec["amplitude"]), m)
    raise ValueError(f"unknown rate kind {kind!r}")


def build_rates(cfg):
    m = cfg["solver"]["grid"]
    return build_rate(cfg["rates"]["lambda_c"], m), build_rate(cfg["rates"]["lambda_d"], m)


def build_basis(cfg, lambda_d, n=None):
    n = cfg["solver"]["n_trunc"] if n is None else n
    m = cfg["solver"]["grid"]
    if cfg["solver"]["basis"] == "cosine":
        return build_cosine_basis(lambda_d, n, m)
    return build_numeric_basis(lambda_d, min(n, m), m)


def solve_fd(cfg, lambda_c, lambda_d, width=None, t_end=None):
    s = cfg["solver"]
    t_end = cfg["time"]["t_end"] if t_end is None else t_end
    m = s["grid"]
    if lambda_c.is_atomic:
        m = s["fd_grid"]
        lambda_c = mollify(lambda_c, s["mollify_width"] if width is None else width, m)
    steps = max(int(round(s["fd_steps_per_unit"] * t_end)), 2)
    return solve_crank_nicolson(lambda_c, lambda_d, t_end, steps, m, cfg["time"]["snapshots"])


@dataclass
class Model:
    lambda_c: object
    lambda_d: object
    basis: object
    proj: object
    solution: object

    @property
    def dist(self):
        return CdmeDistribution(self.solution)

    def gen(self):
        return GenSolution.from_projection(self.proj, self.lambda_d)


def build_model(cfg, alpha_scale=None):
    """Rates, basis, projection and the selected ``v`` solver for a config.

    ``alpha_scale`` multiplies the first eigenvalue; it exists only so
    negative-control tests can corrupt the spectrum.
    """
    lambda_c, lambda_d = build_rates(cfg)
    basis = build_basis(cfg, lambda_d)
    if alpha_scale is not None:
        alphas = basis.alphas.copy()
        alphas[0] *= alpha_scale
        basis = basis.with_alphas(alphas)
    proj = spectral_projection(lambda_c, lambda_d, basis)
    if cfg["solver"]["method"] == "spectral":
        sol = solve_spectral(proj, t_end=cfg["time"]["t_end"], snapshots=cfg["time"]["snapshots"])
    else:
        sol = solve_fd(cfg, lambda_c, lambda_d)
    return Model(lambda_c, lambda_d, basis, proj, sol)


def meta(cfg, command, **extra):
    out = {
        "command": command,
        "scenario": cfg["scenario"],
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
    }
    out.update(extra)
    return out


# -- solve -------------------------------------------------------------------


def run_solve(cfg, out_dir=None):
    """Write v, rho0, rho1, rho2 slices and the fixed-time rho2 surface. Returns (paths, summary)."""
    out_dir = Path(out_dir or cfg["out"])
    model = build_model(cfg)
    dist = model.dist
    sol = model.solution
    times = sol.times
    x = uniform_grid(cfg["output"]["x_points"])
    info = meta(cfg, "solve", method=sol.method)
    paths = {}

    paths["v"] = output.dump_solution(sol, out_dir / "v.csv", times, x, info)
    mass = np.array([dist.mass(t) for t in times])
    paths["rho0"] = output.write_csv(
        out_dir / "rho0.csv", ["t", "mass", "rho0"], zip(times, mass, np.exp(-mass)), info
    )
    rho1 = dist.rho1_surface(times, x)
    paths["rho1"] = output.write_csv(out_dir / "rho1.csv", ["t", "x", "rho1"], output.long_format(times, x, rho1), info)

    def slices():
        for x2 in cfg["output"]["rho2_x2"]:
            v2 = sol.surface(times, [x2])[:, 0]
            surf = np.exp(-mass)[:, None] * rho1_v * v2[:, None] / 2
            for i, t in enumerate(times):
                for j, xj in enumerate(x):
                    yield x2, t, xj, surf[i, j]

    rho1_v = sol.surface(times, x)
    paths["rho2_slices"] = output.write_csv(out_dir / "rho2_slices.csv", ["x2", "t", "x1", "rho2"], slices(), info)
    t2 = cfg["output"]["rho2_time"]
    surf = dist.rho2_surface(t2, x, x)
    paths["rho2_surface"] = output.write_csv(
        out_dir / "rho2_surface.csv",
        ["x1", "x2", "rho2"],
        ((a, b, surf[i, j]) for i, a in enumerate(x) for j, b in enumerate(x)),
        dict(info, t=t2),
    )

    n_max = cfg["output"]["n_max"]
    snaps = [t for t in cfg["simulation"]["snapshots"] if t <= cfg["time"]["t_end"]]
    pmf_rows, summary = [], []
    for t in snaps:
        cd = dist.count_pmf(t, n_max)
        pmf_rows.extend((t, n, p) for n, p in enumerate(cd.pmf))
        summary.append(f"t={t:g}  m(t)={cd.mean:.6f}  rho0={np.exp(-cd.mean):.6f}  tail(n>{n_max})={cd.tail:.3e}")
    paths["count_pmf"] = output.write_csv(out_dir / "count_pmf.csv", ["t", "n", "p"], pmf_rows, info)
    return paths, summary


# -- validate ----------------------------------------------------------------


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""


def _le(name, value, tol, detail=""):
    value = float(value)
    return Check(name, value, tol, bool(value <= tol), detail)


def truncation_errors(proj, t, ns, n_ref):
    """``||v_N(t) - v_ref(t)||_L2`` for each ``N`` by Parseval (orthonormal modes)."""
    amp = proj.c[:n_ref] * -np.expm1(-proj.basis.alphas[:n_ref] * t) / proj.basis.alphas[:n_ref]
    return np.array([np.sqrt(np.sum(amp[n:] ** 2)) for n in ns])


def fd_agreement(cfg, model, t_end=None):
    """Spectral-vs-finite-difference distances.

    Smooth sources: one L-infinity distance over all snapshots. Dirac sources:
    one distance per mollification width, measured farther than
    ``ATOM_EXCLUSION`` from the atom and from ``ATOM_MIN_TIME`` on.
    """
    t_end = cfg["time"]["t_end"] if t_end is None else t_end
    spec = model.solution
    if spec.method != "spectral":
        spec = solve_spectral(model.proj, t_end=t_end, snapshots=cfg["time"]["snapshots"])
    lc, ld = model.lambda_c, model.lambda_d
    if not lc.is_atomic:
        fd = solve_fd(cfg, lc, ld, t_end=t_end)
        return [(None, float(np.abs(spec.surface(fd.times, fd.grid) - fd.snapshots).max()))]
    rows = []
    for w in MOLLIFY_WIDTHS:
        fd = solve_fd(cfg, lc, ld, width=w, t_end=t_end)
        keep = np.abs(fd.grid - lc.location) > ATOM_EXCLUSION
        late = fd.times >= ATOM_MIN_TIME
        diff = spec.surface(fd.times[late], fd.grid[keep]) - fd.snapshots[np.ix_(late, keep)]
        rows.append((w, float(np.abs(diff).max())))
    return rows


def run_validate(cfg, alpha_scale=None, out_dir=None):
    """Run the property suite for one scenario. Returns the list of checks."""
    model = build_model(cfg, alpha_scale=alpha_scale)
    lc, ld = model.lambda_c, model.lambda_d
    dist = model.dist
    sol = model.solution
    checks = []
    t_grid = np.linspace(0.0, cfg["time"]["t_end"], 41)

    gen = model.gen()
    if gen.assumption_two:
        rep = identity_suite(gen, t_grid, strict=False)
        k, t = rep.g_identity_at
        checks.append(_le("identity.g", rep.g_identity_max, rep.g_tol, f"k={k};t={t:g}"))
        checks.append(_le("identity.gamma", rep.gamma_identity, rep.gamma_tol))
        dev = max(abs(gen.rho0_truncated(t) - dist.rho0(t)) for t in t_grid)
        checks.append(_le("rho0.spectral_equivalence", dev, 1e-8))
        pts = np.array([[0.1], [0.37], [0.8]])
        rel = 0.0
        for t in (0.25, 1.0):
            for n in (1, 2):
                p = np.hstack([pts] * n)
                a, b = gen.rho_n_truncated(t, p), dist.rho_n(t, p)
                rel = max(rel, float(np.max(np.abs(a - b) / np.abs(b))))
        checks.append(_le("rho_n.spectral_equivalence", rel, 1e-10))
    else:
        checks.append(Check("identity.gamma", float("nan"), 1e-8, True, "skipped: degradation not spanned"))

    if isinstance(lc, ConstantRate) and isinstance(ld, ConstantRate):
        dev = max(
            abs(dist.count_pmf(t, 30).pmf[n] - cme_reference(lc.value, ld.value, t, n))
            for t in (0.1, 0.5, 1.0, 2.0, 5.0)
            for n in range(31)
        )
        checks.append(_le("pmf.cme_reduction", dev, 1e-10))

    x = uniform_grid(cfg["solver"]["grid"])
    dev = 0.0
    norm_dev = 0.0
    for t in (0.25, 1.0, cfg["time"]["t_end"]):
        m = float(dist.mass(t))
        r1 = trapezoid(dist.rho_n(t, x[:, None]))
        r2 = trapezoid(trapezoid(dist.rho2_surface(t, x, x)))
        dev = max(dev, abs(r1 - m * np.exp(-m)), abs(r2 - m**2 * np.exp(-m) / 2))
        norm_dev = max(norm_dev, abs(trapezoid(dist.conditional_density(t, x)) - 1))
    checks.append(_le("pmf.poisson_consistency", dev, 1e-7))
    checks.append(_le("conditional.normalization", norm_dev, 1e-8))

    smooth = not lc.is_atomic and not ld.is_atomic
    worst = 0.0
    for t in RESIDUAL_TIMES:
        worst = max(worst, cdme_residual(dist, lc, ld, 0, t))
    checks.append(_le("cdme.residual.n0", worst, 1e-4))
    if smooth and sol.method == "spectral":
        pde_worst = max(pde_residual(sol, lc, ld, t, xx) for t in RESIDUAL_TIMES for xx in RESIDUAL_X)
        checks.append(_le("pde.residual", pde_worst, 1e-4))
        for n in (1, 2):
            worst = 0.0
            for t in RESIDUAL_TIMES:
                for i, xx in enumerate(RESIDUAL_X):
                    pts = [xx] if n == 1 else [xx, RESIDUAL_X[(i + 2) % 5]]
                    worst = max(worst, cdme_residual(dist, lc, ld, n, t, pts))
            checks.append(_le(f"cdme.residual.n{n}", worst, 1e-4))

    n_trunc = cfg["solver"]["n_trunc"]
    if lc.is_atomic and n_trunc > 10:
        tc = cfg["validation"]["convergence_t"]
        ref_basis = build_basis(cfg, ld, 2 * n_trunc)
        ref = spectral_projection(lc, ld, ref_basis)
        ns = [n for n in (10, 100, n_trunc) if n <= n_trunc]
        errs = truncation_errors(ref, tc, ns, 2 * n_trunc)
        trend = bool(np.all(np.diff(errs) < 0))
        detail = ";".join(f"N={n}:{e:.3e}" for n, e in zip(ns, errs))
        checks.append(Check("truncation.trend", float(errs[-1]), float(errs[0]), trend, detail))

    if cfg["validation"]["fd_compare"]:
        rows = fd_agreement(cfg, model)
        if rows[0][0] is None:
            checks.append(_le("fd.agreement", rows[0][1], 1e-5))
        else:
            dists = [d for _, d in rows]
            ok = bool(np.all(np.diff(dists) < 0))
            detail = ";".join(f"w={w:g}:{d:.3e}" for w, d in rows)
            checks.append(Check("fd.mollification_trend", dists[-1], dists[0], ok, detail))

    if cfg["validation"]["simulate"]:
        stats = run_ensemble(sim_config(cfg, lc, ld))
        report = compare_stats(stats, dist)
        for snap in report.snapshots:
            checks.append(_le(f"sim.tv@t={snap.t:g}", snap.tv, snap.tv_threshold))
            checks.append(Check(f"sim.chi2@t={snap.t:g}", snap.p_value, 1e-3, snap.p_value > 1e-3, "p-value"))

    if out_dir is not None:
        output.write_csv(
            Path(out_dir) / "validation.csv",
            ["check", "value", "tolerance", "passed", "detail"],
            ((c.name, c.value, c.tolerance, c.passed, c.detail) for c in checks),
            meta(cfg, "validate"),
        )
    return checks


# -- simulate ----------------------------------------------------------------


def sim_config(cfg, lambda_c, lambda_d):
    s = cfg["simulation"]
    t_end = max(s["snapshots"])
    return SimConfig(
        lambda_c, lambda_d, t_end=t_end, dt=s["dt"], trajectories=s["trajectories"],
        seed=cfg["seed"], bins=s["bins"], snapshots=tuple(s["snapshots"]), batch_size=s["batch_size"],
    )


def coarse_mode(stats, i, groups):
    """Index of the most populated bin after merging the histogram into ``groups`` bins."""
    hist = stats.histograms[i].reshape(groups, -1).sum(axis=1)
    return int(np.argmax(hist))


def run_simulate(cfg, out_dir=None, threads=1):
    out_dir = Path(out_dir or cfg["out"])
    lc, ld = build_rates(cfg)
    scfg = sim_config(cfg, lc, ld)
    stats = run_ensemble(scfg, threads=threads)
    model = build_model(cfg)
    dist = model.dist
    report = compare_stats(stats, dist)
    extra = {"trajectories": scfg.trajectories, "dt": scfg.dt, "batch_size": scfg.batch_size}
    if isinstance(lc, DiracRate) and lc.location in (0.0, 1.0):
        extra["note"] = "particles created on the wall start at the wall and are reflected by their first step"
    info = meta(cfg, "simulate", **extra)

    count_rows = []
    for i, t in enumerate(stats.times):
        n_max = max(int(stats.counts[i].max()), 1) + 1
        emp = stats.count_pmf(i, n_max)
        ana = dist.count_pmf(t, n_max).pmf
        count_rows.extend((t, n, emp[n], ana[n]) for n in range(n_max + 1))
    pos_rows = []
    width = np.diff(stats.edges)
    for i, t in enumerate(stats.times):
        emp = stats.density(i)
        ana = dist.solution.bin_masses(t, stats.edges) / width
        pos_rows.extend(
            (t, stats.edges[b], stats.edges[b + 1], emp[b], ana[b]) for b in range(emp.size)
        )
    groups = cfg["simulation"]["mode_bins"]
    cmp_rows = [
        (s.t, s.mean_analytic, s.mean_empirical, s.mean_se, s.tv, s.tv_threshold, s.chi2, s.dof, s.p_value,
         coarse_mode(stats, i, groups), s.passed)
        for i, s in enumerate(report.snapshots)
    ]
    paths = {
        "counts": output.write_csv(out_dir / "counts.csv", ["t", "n", "empirical_p", "analytic_p"], count_rows, info),
        "positions": output.write_csv(
            out_dir / "positions.csv",
            ["t", "bin_left", "bin_right", "empirical_density", "analytic_density"],
            pos_rows, info,
        ),
        "comparison": output.write_csv(
            out_dir / "comparison.csv",
            ["t", "mean_analytic", "mean_empirical", "mean_se", "tv", "tv_threshold", "chi2", "dof",
             "p_value", f"mode_of_{groups}_bins", "passed"],
            cmp_rows, info,
        ),
    }
    return paths, stats, report


# -- convergence / compare ---------------------------------------------------


def run_convergence(cfg, out_dir=None, t=None):
    """Table of ``||v_N - v_2N||_L2`` at fixed ``t`` over doubling ``N``."""
    out_dir = Path(out_dir or cfg["out"])
    t = cfg["validation"]["convergence_t"] if t is None else t
    lc, ld = build_rates(cfg)
    n_top = 2 * CONVERGENCE_N[-1]
    basis = build_basis(cfg, ld, n_top)
    proj = spectral_projection(lc, ld, basis)
    rows = []
    for n in CONVERGENCE_N:
        diff = truncation_errors(proj, t, [n], 2 * n)[0]
        rows.append((n, diff, proj.c[n - 1]))
    path = output.write_csv(
        out_dir / "convergence.csv", ["n", "l2_diff_n_2n", "coefficient_at_n"], rows, meta(cfg, "convergence", t=t)
    )
    return path, rows


def run_compare(cfg, out_dir=None):
    """Spectral vs finite-difference distances (per mollification width for Dirac sources)."""
    out_dir = Path(out_dir or cfg["out"])
    model = build_model(cfg)
    rows = fd_agreement(cfg, model)
    path = output.write_csv(
        out_dir / "compare.csv",
        ["mollify_width", "linf_distance"],
        (("none" if w is None else w, d) for w, d in rows),
        meta(cfg, "compare", atom_exclusion=ATOM_EXCLUSION, min_time=ATOM_MIN_TIME),
    )
    return path, rows
