"""Particle simulation of diffusing, dying and appearing molecules on [0, 1].

This is the stochastic oracle for the analytic solution: no part of it
uses ``v``. Particles take Gaussian steps of variance ``2 dt`` (the
generator is the bare Laplacian), are folded back into [0, 1] at the
walls, die with probability ``1 - exp(-lambda_d(x) dt)`` per step, and
are created as a Poisson stream of rate ``gamma = int lambda_c`` placed
according to ``lambda_c / gamma``.

Trajectories are simulated in vectorised batches. Each batch draws from
``SeedSequence([seed, batch_index])`` and results are merged in batch
order, so output is reproducible for a fixed seed and batch size
regardless of thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import InsufficientSnapshots, SnapshotMismatch
from .grid import uniform_grid
from .rates import ConstantRate, DiracRate, as_tabulated

DEFAULT_SNAPSHOTS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class SimConfig:
    lambda_c: object
    lambda_d: object
    t_end: float = 4.0
    dt: float = 1e-4
    trajectories: int = 10_000
    seed: int = 0
    bins: int = 50
    snapshots: tuple = DEFAULT_SNAPSHOTS
    batch_size: int = 2000

    def __post_init__(self):
        if not self.dt > 0 or self.dt > self.t_end:
            raise ValueError("need 0 < dt <= t_end")
        if self.trajectories < 1 or self.bins < 1 or self.batch_size < 1:
            raise ValueError("trajectories, bins and batch_size must be >= 1")
        snaps = tuple(float(s) for s in self.snapshots)
        if any(s < 0 or s > self.t_end + 1e-12 for s in snaps):
            raise ValueError("snapshot times must lie in [0, t_end]")
        object.__setattr__(self, "snapshots", snaps)

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    @property
    def snapshot_steps(self):
        return [int(round(s / self.dt)) for s in self.snapshots]

    @property
    def edges(self):
        return np.linspace(0.0, 1.0, self.bins + 1)


def fold(x):
    """Reflect positions into [0, 1] (x -> -x at 0, x -> 2 - x at 1, iterated)."""
    y = np.abs(x) % 2.0
    return np.where(y > 1.0, 2.0 - y, y)


def creation_sampler(lambda_c, m=4001):
    """Return ``sample(rng, k)`` drawing ``k`` creation sites from ``lambda_c / gamma``."""
    if isinstance(lambda_c, DiracRate):
        loc = lambda_c.location
        return lambda rng, k: np.full(k, loc)
    if isinstance(lambda_c, ConstantRate):
        return lambda rng, k: rng.random(k)
    vals = as_tabulated(lambda_c, m).values if not hasattr(lambda_c, "values") else lambda_c.values
    grid = uniform_grid(vals.size)
    h = grid[1] - grid[0]
    cdf = np.concatenate([[0.0], np.cumsum((vals[1:] + vals[:-1]) * h / 2)])
    cdf /= cdf[-1]
    return lambda rng, k: np.interp(rng.random(k), cdf, grid)


def _death_probability(lambda_d, dt):
    if isinstance(lambda_d, ConstantRate):
        p = -math.expm1(-lambda_d.value * dt)
        return lambda x: p
    if isinstance(lambda_d, DiracRate):
        raise ValueError("point-supported degradation cannot act on diffusing particles")
    return lambda x: -np.expm1(-lambda_d.evaluate(x) * dt)


def simulate_batch(cfg, size, rng):
    """Simulate ``size`` independent trajectories together.

    Returns, for every snapshot, the pair ``(positions, trajectory_ids)``.
    Births are drawn as one Poisson total over the batch and assigned to
    trajectories uniformly, which is the same law as independent per-trajectory
    Poisson counts.
    """
    birth_mean = cfg.lambda_c.total() * cfg.dt * size
    place = creation_sampler(cfg.lambda_c)
    p_death = _death_probability(cfg.lambda_d, cfg.dt)
    step_sd = math.sqrt(2.0 * cfg.dt)

    wanted = {}
    for j, s in enumerate(cfg.snapshot_steps):
        wanted.setdefault(s, []).append(j)
    out = [None] * len(cfg.snapshots)

    pos = np.empty(0)
    owner = np.empty(0, dtype=np.int64)
    for step in range(cfg.n_steps + 1):
        if step in wanted:
            for j in wanted[step]:
                out[j] = (pos.copy(), owner.copy())
        if step == cfg.n_steps:
            break
        if pos.size:
            alive = rng.random(pos.size) >= p_death(pos)
            if not alive.all():
                pos, owner = pos[alive], owner[alive]
            pos = fold(pos + step_sd * rng.standard_normal(pos.size))
        k = rng.poisson(birth_mean)
        if k:
            # newborns sit at their creation site until the next step moves them
            pos = np.concatenate([pos, place(rng, k)])
            owner = np.concatenate([owner, rng.integers(0, size, k)])
    return out


def derive_seed(seed, index):
    return np.random.SeedSequence([int(seed), int(index)])


def simulate_trajectory(cfg, seed):
    """Positions of one trajectory at each snapshot time (list of arrays)."""
    rng = np.random.default_rng(seed)
    return [positions for positions, _ in simulate_batch(cfg, 1, rng)]


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Aggregated statistics of an ensemble of trajectories.

    Attributes
    ----------
    counts
        Particle count of each trajectory at each snapshot,
        shape ``(n_snapshots, trajectories)``.
    histograms
        Pooled position counts per bin, shape ``(n_snapshots, bins)``.
    pairs
        For every snapshot, the positions of trajectories holding exactly
        two particles, shape ``(k, 2)``.
    """

    times: np.ndarray
    counts: np.ndarray = field(repr=False)
    histograms: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)
    pairs: tuple = field(repr=False)
    seed: int = 0

    @property
    def trajectories(self):
        return self.counts.shape[1]

    def count_pmf(self, i, n_max=None):
        n_max = int(self.counts[i].max()) if n_max is None else n_max
        freq = np.bincount(self.counts[i], minlength=n_max + 1)[: n_max + 1]
        return freq / self.trajectories

    def mean_count(self, i):
        return float(self.counts[i].mean())

    def mean_count_se(self, i):
        return float(self.counts[i].std(ddof=1) / math.sqrt(self.trajectories)) if self.trajectories > 1 else math.inf

    def density(self, i):
        """Histogram normalised so its integral is the mean particle count."""
        width = np.diff(self.edges)
        return self.histograms[i] / (self.trajectories * width)

    def pair_correlation(self, i):
        """Exchangeable correlation of the two positions in n = 2 trajectories, with its SE."""
        pairs = self.pairs[i]
        if len(pairs) < 3:
            return math.nan, math.inf
        sym = np.vstack([pairs, pairs[:, ::-1]])
        r = float(np.corrcoef(sym[:, 0], sym[:, 1])[0, 1])
        return r, 1.0 / math.sqrt(len(pairs))


def _summarise(cfg, snaps, size):
    counts = np.empty((len(snaps), size), dtype=np.int64)
    hists = np.empty((len(snaps), cfg.bins), dtype=np.int64)
    pairs = []
    for j, (pos, owner) in enumerate(snaps):
        counts[j] = np.bincount(owner, minlength=size)
        hists[j] = np.histogram(pos, bins=cfg.edges)[0]
        order = np.argsort(owner, kind="stable")
        two = np.flatnonzero(counts[j] == 2)
        sel = np.isin(owner[order], two)
        pairs.append(pos[order][sel].reshape(-1, 2))
    return counts, hists, pairs


def run_ensemble(cfg, threads=1):
    """Simulate ``cfg.trajectories`` trajectories and aggregate them."""
    sizes = [cfg.batch_size] * (cfg.trajectories // cfg.batch_size)
    if cfg.trajectories % cfg.batch_size:
        sizes.append(cfg.trajectories % cfg.batch_size)

    def one(b):
        rng = np.random.default_rng(derive_seed(cfg.seed, b))
        return _summarise(cfg, simulate_batch(cfg, sizes[b], rng), sizes[b])

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    else:
        parts = [one(b) for b in range(len(sizes))]

    counts = np.concatenate([p[0] for p in parts], axis=1)
    hists = np.sum([p[1] for p in parts], axis=0)
    pairs = tuple(
        np.vstack([p[2][j] for p in parts]) for j in range(len(cfg.snapshots))
    )
    return EnsembleStats(np.array(cfg.snapshots), counts, hists, cfg.edges, pairs, cfg.seed)


def sample_analytic_stats(dist, times, trajectories, bins=50, seed=0):
    """Draw an ensemble straight from the Poisson-field solution (self-test input)."""
    rng = np.random.default_rng(seed)
    edges = np.linspace(0.0, 1.0, bins + 1)
    fine = np.linspace(0.0, 1.0, 4001)
    counts, hists, pairs = [], [], []
    for t in times:
        mean = float(dist.mass(t))
        n = rng.poisson(mean, trajectories)
        masses = np.clip(dist.solution.bin_masses(t, fine), 0.0, None)
        cdf = np.concatenate([[0.0], np.cumsum(masses)])
        cdf /= cdf[-1]
        pos = np.interp(rng.random(int(n.sum())), cdf, fine)
        owner = np.repeat(np.arange(trajectories), n)
        counts.append(n)
        hists.append(np.histogram(pos, bins=edges)[0])
        two = np.isin(owner, np.flatnonzero(n == 2))
        pairs.append(pos[two].reshape(-1, 2))
    return EnsembleStats(np.asarray(times, dtype=float), np.array(counts), np.array(hists), edges, tuple(pairs), seed)


@dataclass
class SnapshotComparison:
    t: float
    mean_analytic: float
    mean_empirical: float
    mean_se: float
    tv: float
    tv_threshold: float
    chi2: float
    dof: int
    p_value: float
    mode_bin: int

    @property
    def passed(self):
        return self.tv <= self.tv_threshold and self.p_value > 1e-3


@dataclass
class ComparisonReport:
    snapshots: list

    @property
    def passed(self):
        return all(s.passed for s in self.snapshots)


def _chi_square(observed, expected_prob, min_expected=5.0):
    total = observed.sum()
    expected = total * expected_prob
    big = expected >= min_expected
    obs = list(observed[big])
    exp = list(expected[big])
    if (~big).any():
        obs.append(observed[~big].sum())
        exp.append(expected[~big].sum())
    obs, exp = np.array(obs, dtype=float), np.array(exp)
    exp *= obs.sum() / exp.sum()
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    dof = obs.size - 1
    return chi2, dof, float(sps.chi2.sf(chi2, dof)) if dof > 0 else 1.0


def compare_stats(stats, dist, exclude_bins=None, sigmas=3.0):
    """Compare an ensemble with the analytic Poisson-field prediction.

    Per snapshot: total-variation distance of the count pmf from
    ``Poisson(m(t))`` against a CLT threshold of ``sigmas`` standard errors,
    and a chi-square test of the pooled positions against the bin masses of
    ``p(t, .)``. ``exclude_bins`` maps a snapshot index to bin indices left
    out of the chi-square.
    """
    exclude_bins = exclude_bins or {}
    k = stats.trajectories
    rows = []
    for i, t in enumerate(stats.times):
        try:
            mean = float(dist.mass(t))
            masses = np.clip(dist.solution.bin_masses(t, stats.edges), 0.0, None)
        except InsufficientSnapshots as exc:
            raise SnapshotMismatch(f"analytic solution unavailable at t={t}") from exc
        emp = stats.count_pmf(i)
        n_max = max(emp.size - 1, int(sps.poisson.ppf(1 - 1e-12, mean)) if mean > 0 else 0)
        emp = np.pad(emp, (0, n_max + 1 - emp.size))
        ana = sps.poisson.pmf(np.arange(n_max + 1), mean)
        tv = 0.5 * float(np.abs(emp - ana).sum() + max(0.0, 1 - ana.sum()))
        threshold = 0.5 * sigmas * float(np.sum(np.sqrt(ana * (1 - ana) / k))) + 1.0 / k

        keep = np.ones(masses.size, dtype=bool)
        keep[list(exclude_bins.get(i, ()))] = False
        hist = stats.histograms[i]
        if hist.sum() and masses.sum() > 0:
            prob = masses[keep] / masses[keep].sum()
            chi2, dof, pval = _chi_square(hist[keep], prob)
        else:
            chi2, dof, pval = 0.0, 0, 1.0
        rows.append(
            SnapshotComparison(
                float(t), mean, stats.mean_count(i), stats.mean_count_se(i),
                tv, threshold, chi2, dof, pval, int(np.argmax(hist)),
            )
        )
    return ComparisonReport(rows)
