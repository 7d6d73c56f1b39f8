"""Seeded Poisson / Wiener / Brownian path ensembles and statistical martingale checks.

Randomness is counter-based: paths are cut into fixed blocks of
``BLOCK_PATHS`` and block ``b`` draws from a Philox stream keyed by
``(seed, process tag, b)``.  The value at any (path, interval) therefore
depends only on the seed, never on how many workers produced it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from pbn.dims import DimDeclaration, Dimension, FormulaCheck, check_formula
from pbn.errors import (
    BadRate,
    BadVolatility,
    InvalidGrid,
    NotCompensatedBrownian,
    TimesNotOnGrid,
    TooFewPaths,
    UnknownMeanFunction,
)

BLOCK_PATHS = 4096
MIN_PATHS = 1000
MIN_BIN = 30
GRID_TOL = 1e-9
_TAGS = {"poisson": 1, "brownian": 2}


@dataclass(frozen=True, eq=False)
class TimeGrid:
    times: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise InvalidGrid("grid needs at least two times")
        if t[0] != 0.0:
            raise InvalidGrid("grid must start at 0")
        if np.any(np.diff(t) <= 0):
            raise InvalidGrid("grid times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, t_end: float, steps: int) -> TimeGrid:
        return cls(np.linspace(0.0, t_end, steps + 1))

    def index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > GRID_TOL:
            raise TimesNotOnGrid(f"time {t} is not on the grid")
        return k

    def __len__(self) -> int:
        return len(self.times)


def default_dims() -> DimDeclaration:
    """x ~ L, t ~ T and the process parameters used by the samplers."""
    return DimDeclaration({
        "x": Dimension(L=1),
        "t": Dimension(T=1),
        "lambda": Dimension(T=-1),
        "mu": Dimension(L=1, T=-1),
        "sigma": Dimension(L=1, T=-0.5),
        "N": Dimension(),
    })


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    grid: TimeGrid
    paths: np.ndarray
    seed: int
    kind: str
    params: dict = field(default_factory=dict)
    dims: DimDeclaration = field(default_factory=default_dims)

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def column(self, t: float) -> np.ndarray:
        return self.paths[:, self.grid.index(t)]


def _block_rng(seed: int, tag: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(tag, block))
    return np.random.Generator(np.random.Philox(ss))


def _generate(n_paths: int, draw, tag: int, seed: int, workers: int) -> np.ndarray:
    blocks = [(b, min(BLOCK_PATHS, n_paths - b * BLOCK_PATHS))
              for b in range(math.ceil(n_paths / BLOCK_PATHS))]

    def run(job):
        b, size = job
        return draw(_block_rng(seed, tag, b), size)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(job) for job in blocks]
    incs = np.concatenate(parts, axis=0)
    paths = np.zeros((n_paths, incs.shape[1] + 1))
    np.cumsum(incs, axis=1, out=paths[:, 1:])
    paths.setflags(write=False)
    return paths


def sample_poisson(lam: float, grid: TimeGrid, n_paths: int, seed: int,
                   workers: int = 1) -> PathEnsemble:
    """Counting process with independent Poisson(lam * dt) increments per interval."""
    if not lam > 0:
        raise BadRate(f"rate must be positive, got {lam}")
    dt = np.diff(grid.times)
    paths = _generate(n_paths, lambda rng, size: rng.poisson(lam * dt, size=(size, len(dt))),
                      _TAGS["poisson"], seed, workers)
    return PathEnsemble(grid, paths, seed, "poisson", {"lambda": float(lam)})


def sample_brownian(mu: float, sigma: float, grid: TimeGrid, n_paths: int, seed: int,
                    workers: int = 1) -> PathEnsemble:
    """X_t = mu t + sigma W_t with Gaussian increments on the grid."""
    if not sigma > 0:
        raise BadVolatility(f"volatility must be positive, got {sigma}")
    dt = np.diff(grid.times)

    def draw(rng, size):
        return mu * dt + sigma * np.sqrt(dt) * rng.standard_normal((size, len(dt)))

    paths = _generate(n_paths, draw, _TAGS["brownian"], seed, workers)
    return PathEnsemble(grid, paths, seed, "brownian", {"mu": float(mu), "sigma": float(sigma)})


def mean_function(ens: PathEnsemble) -> np.ndarray:
    t = ens.grid.times
    if ens.kind == "poisson":
        return ens.params["lambda"] * t
    if ens.kind == "brownian":
        return ens.params["mu"] * t
    raise UnknownMeanFunction(f"no analytic mean for process kind {ens.kind!r}")


def compensate(ens: PathEnsemble) -> PathEnsemble:
    """Subtract the analytic mean function: N_t - lam t or X_t - mu t."""
    paths = ens.paths - mean_function(ens)[None, :]
    paths.setflags(write=False)
    return replace(ens, paths=paths, kind=f"compensated_{ens.kind}")


def quadratic_martingale(comp: PathEnsemble, sigma: float | None = None) -> PathEnsemble:
    """M_t = Z_t^2 - sigma^2 t for compensated Brownian Z."""
    if comp.kind != "compensated_brownian":
        raise NotCompensatedBrownian(f"need compensated Brownian paths, got {comp.kind!r}")
    sigma = comp.params["sigma"] if sigma is None else sigma
    paths = comp.paths ** 2 - sigma**2 * comp.grid.times[None, :]
    paths.setflags(write=False)
    return replace(comp, paths=paths, kind="quadratic_brownian")


@dataclass
class BinRow:
    lo: float
    hi: float
    count: int
    estimate: float
    stderr: float
    sigmas: float
    passed: bool

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "count": self.count, "estimate": self.estimate,
                "stderr": self.stderr, "sigmas": self.sigmas, "pass": self.passed}


@dataclass
class StatReport:
    s: float
    t: float
    bins: list
    drift: float
    drift_stderr: float
    pooled_sigmas: float
    confidence: float
    passed: bool

    def to_dict(self):
        return {"s": self.s, "t": self.t, "bins": [b.to_dict() for b in self.bins],
                "drift": self.drift, "drift_stderr": self.drift_stderr,
                "pooled_sigmas": self.pooled_sigmas, "confidence": self.confidence,
                "pass": self.passed}


def _bin_edges(values: np.ndarray, n_bins: int) -> list[np.ndarray]:
    """Roughly equal-frequency groups of paths by their time-s value.

    Distinct values are swept in order and a group is closed once it holds
    its share of the paths not yet assigned, so tied values never straddle
    two groups and a heavy atom does not use up the bin budget.  Groups
    smaller than MIN_BIN are merged into a neighbour.
    """
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    uniq, starts = np.unique(sorted_vals, return_index=True)
    bounds = list(starts) + [len(values)]
    n = len(values)
    groups, begin = [], 0
    for k in range(len(uniq)):
        end = bounds[k + 1]
        left = max(n_bins - len(groups), 1)
        if end - begin >= (n - begin) / left or k == len(uniq) - 1:
            groups.append(order[begin:end])
            begin = end
    merged: list[np.ndarray] = []
    for g in groups:
        if merged and merged[-1].size < MIN_BIN:
            merged[-1] = np.concatenate([merged[-1], g])
        else:
            merged.append(g)
    if len(merged) > 1 and merged[-1].size < MIN_BIN:
        tail = merged.pop()
        merged[-1] = np.concatenate([merged[-1], tail])
    return merged


def verify_martingale_statistical(ens: PathEnsemble, s: float, t: float, bins: int = 8,
                                  confidence: float = 4.0) -> StatReport:
    """Binned check of E[(Y_t - Y_s) I_B] = 0 for events B determined by Y_s."""
    if not s < t:
        raise ValueError("need s < t")
    if ens.n_paths < MIN_PATHS:
        raise TooFewPaths(f"{ens.n_paths} paths; at least {MIN_PATHS} required")
    ys, yt = ens.column(s), ens.column(t)
    d = yt - ys
    n = ens.n_paths
    rows = []
    for idx in _bin_edges(ys, bins):
        ind = np.zeros(n)
        ind[idx] = 1.0
        contrib = d * ind
        est = float(contrib.mean())
        se = float(contrib.std(ddof=1) / math.sqrt(n))
        z = est / se if se > 0 else (0.0 if est == 0 else math.inf)
        rows.append(BinRow(float(ys[idx].min()), float(ys[idx].max()), int(idx.size), est, se,
                           z, abs(z) <= confidence))
    drift = float(d.mean())
    drift_se = float(d.std(ddof=1) / math.sqrt(n))
    pooled = drift / drift_se if drift_se > 0 else 0.0
    ok = all(r.passed for r in rows) and abs(pooled) <= confidence
    return StatReport(s, t, rows, drift, drift_se, pooled, confidence, ok)


@dataclass
class IncrementReport:
    correlation: float
    corr_sigmas: float
    independent: bool
    ks_statistic: float | None
    ks_threshold: float | None
    homogeneous: bool | None

    @property
    def passed(self) -> bool:
        return self.independent and self.homogeneous is not False

    def to_dict(self):
        return {"correlation": self.correlation, "sigmas": self.corr_sigmas,
                "independent": self.independent, "ks_statistic": self.ks_statistic,
                "ks_threshold": self.ks_threshold, "homogeneous": self.homogeneous,
                "pass": self.passed}


def independent_increments_check(ens: PathEnsemble, s: float, t: float, confidence: float = 4.0,
                                 n_perm: int = 200, subsample: int = 2000, alpha: float = 0.01,
                                 seed: int = 0) -> IncrementReport:
    """Correlation of X_s - X_0 with X_t - X_s, plus a permutation KS test of
    X_t - X_s against X_{t-s} - X_0 when t - s is on the grid."""
    if not 0 < s < t:
        raise ValueError("need 0 < s < t")
    x0, xs, xt = ens.paths[:, 0], ens.column(s), ens.column(t)
    a, b = xs - x0, xt - xs
    n = ens.n_paths
    if a.std() == 0 or b.std() == 0:
        rho = 0.0
    else:
        rho = float(np.corrcoef(a, b)[0, 1])
    z = abs(rho) * math.sqrt(n)
    independent = z <= confidence

    ks = thresh = None
    homogeneous = None
    try:
        lag = ens.column(t - s) - x0
    except TimesNotOnGrid:
        lag = None
    if lag is not None:
        rng = np.random.default_rng(seed)
        m = min(subsample, n)
        # disjoint paths for the two samples keep them independent of each other
        order = rng.permutation(n)
        u, v = b[order[:m]], lag[order[m: 2 * m]] if n >= 2 * m else lag[order[:m]]
        ks = float(stats.ks_2samp(u, v, method="asymp").statistic)
        pooled = np.concatenate([u, v])
        null = []
        for _ in range(n_perm):
            p = rng.permutation(pooled)
            null.append(stats.ks_2samp(p[:m], p[m:], method="asymp").statistic)
        thresh = float(np.quantile(null, 1 - alpha))
        homogeneous = ks <= thresh + 1e-12
    return IncrementReport(rho, z, independent, ks, thresh, homogeneous)


def moment_summary(ens: PathEnsemble, t: float) -> dict:
    """Sample mean/variance at time t with their standard errors."""
    x = ens.column(t)
    n = len(x)
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    m4 = float(np.mean((x - mean) ** 4))
    return {
        "mean": mean,
        "mean_stderr": math.sqrt(var / n),
        "var": var,
        "var_stderr": math.sqrt(max(m4 - var**2, 0.0) / n),
    }


def check_parameter_dims(ens: PathEnsemble) -> list[FormulaCheck]:
    """Dimension checks for the parameters the ensemble carries."""
    out = []
    if "lambda" in ens.params:
        out.append(check_formula("lambda", "t^-1", ens.dims))
        out.append(check_formula("lambda*t", "N", ens.dims))
    if "sigma" in ens.params:
        out.append(check_formula("sigma", "x*t^(-1/2)", ens.dims))
        out.append(check_formula("mu", "x/t", ens.dims))
        out.append(check_formula("x", "mu*t + sigma*t^(1/2)", ens.dims))
    return out
