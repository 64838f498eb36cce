"""Monte Carlo orchestration, summary statistics, and statistical tests.

Replications are deterministic functions of (master seed, replication
index): each owns a substream generator, so results are byte-identical
for a fixed spec regardless of worker count or scheduling.  Aggregation
is an ordered fold over replication indices.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cost_engine import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_BETA_GRID,
    Functional,
    alpha_step,
    beta_step,
    event_costs,
)
from .process_core import Embedding, simulate
from .seeding import substream_rng

_Z95 = 1.959963984540054


@dataclass
class SummaryStats:
    """Mergeable (count, mean, M2, min, max) accumulator (Welford/Chan)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    min: float = math.inf
    max: float = -math.inf

    def push(self, x: float) -> None:
        x = float(x)
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)
        self.min = min(self.min, x)
        self.max = max(self.max, x)

    def merge(self, other: "SummaryStats") -> "SummaryStats":
        if other.count == 0:
            return SummaryStats(self.count, self.mean, self.m2, self.min, self.max)
        if self.count == 0:
            return SummaryStats(other.count, other.mean, other.m2, other.min, other.max)
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return SummaryStats(count, mean, m2, min(self.min, other.min), max(self.max, other.max))

    @classmethod
    def from_values(cls, values) -> "SummaryStats":
        stats = cls()
        for v in values:
            stats.push(v)
        return stats

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std(self) -> float:
        return math.sqrt(max(0.0, self.variance))

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(self.count) if self.count else math.nan

    @property
    def ci95(self) -> float:
        return _Z95 * self.stderr


@dataclass(frozen=True)
class ExperimentSpec:
    """One Monte Carlo experiment: chain size, embedding, costs, grids."""

    n: int
    embedding: Embedding = Embedding.DIRECT
    functionals: tuple = tuple(Functional)
    reps: int = 1
    seed: int = 0
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    beta_grid: tuple = DEFAULT_BETA_GRID
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "embedding", Embedding(self.embedding))
        object.__setattr__(
            self, "functionals", tuple(Functional(f) for f in self.functionals)
        )
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        object.__setattr__(self, "beta_grid", tuple(float(b) for b in self.beta_grid))
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if any(not 0.0 <= a < 1.0 for a in self.alpha_grid):
            raise ValueError("alpha grid must lie in [0, 1)")
        if any(not 0.0 <= b <= math.sqrt(self.n) for b in self.beta_grid):
            raise ValueError("beta grid must lie in [0, sqrt(n)]")


def _one_rep(args):
    """One replication -> (alpha matrix, beta matrix, totals) per functional.

    Alpha checkpoints are C/n, beta checkpoints n^{-3/2} C, totals raw.
    """
    n, embedding, functionals, seed, rep, alpha_steps, beta_steps = args
    rng = substream_rng(seed, rep)
    batch = simulate(n, rng, embedding)
    nf = len(functionals)
    alpha_vals = np.empty((nf, len(alpha_steps)))
    beta_vals = np.empty((nf, len(beta_steps)))
    totals = np.empty(nf)
    scale_b = n ** 1.5
    for i, functional in enumerate(functionals):
        csum = np.cumsum(event_costs(functional, batch))
        alpha_vals[i] = [0.0 if m == 0 else csum[m - 1] / n for m in alpha_steps]
        beta_vals[i] = [0.0 if m == 0 else csum[m - 1] / scale_b for m in beta_steps]
        totals[i] = csum[-1]
    return alpha_vals, beta_vals, totals


@dataclass
class MonteCarloResult:
    """Raw per-replication checkpoint values plus summary accessors."""

    spec: ExperimentSpec
    alpha_values: dict  # functional -> (reps, n_alpha) array of C/n
    beta_values: dict  # functional -> (reps, n_beta) array of n^-1.5 C
    totals: dict  # functional -> (reps,) array of raw totals

    def summary(self, functional, kind: str, index: int) -> SummaryStats:
        functional = Functional(functional)
        if kind == "alpha":
            return SummaryStats.from_values(self.alpha_values[functional][:, index])
        if kind == "beta":
            return SummaryStats.from_values(self.beta_values[functional][:, index])
        if kind == "total":
            return SummaryStats.from_values(self.totals[functional])
        raise ValueError("kind must be alpha, beta or total")

    def normalized_totals(self, functional, exponent: float = 1.5) -> np.ndarray:
        return self.totals[Functional(functional)] / self.spec.n ** exponent

    def rows(self):
        """Flat (functional, kind, grid point, SummaryStats) records."""
        out = []
        for f in self.spec.functionals:
            for j, a in enumerate(self.spec.alpha_grid):
                out.append((f, "alpha", a, self.summary(f, "alpha", j)))
            for j, b in enumerate(self.spec.beta_grid):
                out.append((f, "beta", b, self.summary(f, "beta", j)))
            out.append((f, "total", math.nan, self.summary(f, "total", 0)))
        return out


def run_monte_carlo(spec: ExperimentSpec) -> MonteCarloResult:
    """Execute spec.reps independent replications (optionally in parallel)."""
    alpha_steps = tuple(alpha_step(spec.n, a) for a in spec.alpha_grid)
    beta_steps = tuple(beta_step(spec.n, b) for b in spec.beta_grid)
    args = [
        (spec.n, spec.embedding, spec.functionals, spec.seed, rep, alpha_steps, beta_steps)
        for rep in range(spec.reps)
    ]
    if spec.workers > 1 and spec.reps > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_one_rep, args, chunksize=max(1, spec.reps // (4 * spec.workers))))
    else:
        results = [_one_rep(a) for a in args]
    nf = len(spec.functionals)
    alpha_values = {f: np.empty((spec.reps, len(alpha_steps))) for f in spec.functionals}
    beta_values = {f: np.empty((spec.reps, len(beta_steps))) for f in spec.functionals}
    totals = {f: np.empty(spec.reps) for f in spec.functionals}
    for rep, (av, bv, tv) in enumerate(results):
        for i in range(nf):
            f = spec.functionals[i]
            alpha_values[f][rep] = av[i]
            beta_values[f][rep] = bv[i]
            totals[f][rep] = tv[i]
    return MonteCarloResult(spec, alpha_values, beta_values, totals)


# ---------------------------------------------------------------------------
# statistical tests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float
    level: float

    @property
    def reject(self) -> bool:
        return self.pvalue < self.level


def _kolmogorov_sf(y: float) -> float:
    """Survival function of the Kolmogorov distribution (alternating series)."""
    if y < 1e-8:
        return 1.0
    total = 0.0
    sign = 1.0
    for j in range(1, 101):
        term = math.exp(-2.0 * (j * y) ** 2)
        total += sign * term
        if term < 1e-16 * max(total, 1e-300):
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def ks_two_sample(sample_a, sample_b, level: float = 0.05) -> KsResult:
    """Two-sample Kolmogorov-Smirnov with the asymptotic p-value."""
    a = np.sort(np.asarray(sample_a, dtype=np.float64))
    b = np.sort(np.asarray(sample_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    pvalue = _kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
    return KsResult(d, pvalue, level)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    pvalue: float
    level: float
    bins: int

    @property
    def reject(self) -> bool:
        return self.pvalue < self.level


def chi_square_gof(observed, expected_probs, level: float = 0.05,
                   min_expected: float = 5.0) -> ChiSquareResult:
    """Pearson goodness of fit against given cell probabilities.

    Adjacent cells are pooled left to right until each pooled cell's
    expected count reaches min_expected (a trailing underfull pool is
    merged into the last cell); fewer than two cells after pooling is an
    error.
    """
    from scipy.special import gammaincc

    obs = np.asarray(observed, dtype=np.float64)
    probs = np.asarray(expected_probs, dtype=np.float64)
    if obs.shape != probs.shape:
        raise ValueError("observed and expected lengths differ")
    if np.any(probs < 0):
        raise ValueError("expected probabilities must be nonnegative")
    total = obs.sum()
    expected = probs / probs.sum() * total
    pooled_obs, pooled_exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            pooled_obs.append(acc_o)
            pooled_exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0.0:
        if pooled_obs:
            pooled_obs[-1] += acc_o
            pooled_exp[-1] += acc_e
        else:
            pooled_obs.append(acc_o)
            pooled_exp.append(acc_e)
    if len(pooled_obs) < 2:
        raise ValueError("degenerate pooling: fewer than two cells with enough mass")
    po = np.array(pooled_obs)
    pe = np.array(pooled_exp)
    stat = float(np.sum((po - pe) ** 2 / pe))
    dof = len(po) - 1
    pvalue = float(gammaincc(dof / 2.0, stat / 2.0))
    return ChiSquareResult(stat, dof, pvalue, level, len(po))


# ---------------------------------------------------------------------------
# regime sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegimeRow:
    n: int
    k_sparse: int  # floor(n - n^(1/2 + eps)), deep in the sparse regime
    k_full: int  # floor(n - n^(1/2 - eps)), deep in the almost-full regime
    sparse: SummaryStats  # B/n at k_sparse
    full: SummaryStats  # B/n at k_full


def regime_sweep(n_list, eps: float, reps: int = 100, seed: int = 0,
                 embedding: Embedding = Embedding.DIRECT) -> list:
    """Mean largest-cluster fraction at the two regime checkpoints per n."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must be in (0, 1/2)")
    rows = []
    for i, n in enumerate(n_list):
        k_sparse = min(n - 1, max(0, int(math.floor(n - n ** (0.5 + eps)))))
        k_full = min(n - 1, max(0, int(math.floor(n - n ** (0.5 - eps)))))
        st_sparse = SummaryStats()
        st_full = SummaryStats()
        for rep in range(reps):
            rng = substream_rng(seed, i * reps + rep)
            batch = simulate(n, rng, embedding)
            st_sparse.push(batch.largest_cluster_at(k_sparse) / n)
            st_full.push(batch.largest_cluster_at(k_full) / n)
        rows.append(RegimeRow(n, k_sparse, k_full, st_sparse, st_full))
    return rows
