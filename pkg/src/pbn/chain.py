"""Finite Markov chains, discrete-time martingales and exact path-tree checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from pbn.errors import (
    BoundExceeded,
    InvalidChain,
    NonZeroMeanIncrement,
    NotAnEigenpair,
    TreeTooLarge,
    ZeroLambda,
    ZeroVector,
)

ROW_TOL = 1e-12
EIGEN_TOL = 1e-10
MARTINGALE_TOL = 1e-10
TREE_CAP = 10**6


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MarkovChainModel:
    states: tuple
    P: np.ndarray
    initial: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        P = _frozen(self.P)
        n = len(self.states)
        if P.shape != (n, n):
            raise InvalidChain(f"transition matrix has shape {P.shape}, expected {(n, n)}")
        if np.any(P < 0):
            raise InvalidChain("negative transition probability")
        rows = np.array([math.fsum(r) for r in P])
        bad = np.flatnonzero(np.abs(rows - 1.0) > ROW_TOL)
        if bad.size:
            raise InvalidChain(f"rows {bad.tolist()} do not sum to 1")
        init = _frozen(self.initial)
        if init.shape != (n,) or np.any(init < 0) or abs(math.fsum(init) - 1.0) > ROW_TOL:
            raise InvalidChain("initial distribution must be a probability vector over the states")
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "initial", init)
        if self.values is not None:
            vals = _frozen(self.values)
            if vals.shape != (n,):
                raise InvalidChain("need one value per state")
            object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.states)

    def state_values(self) -> np.ndarray:
        return self.values if self.values is not None else np.arange(self.n, dtype=float)


def naive_power(P: np.ndarray, k: int) -> np.ndarray:
    out = np.eye(len(P))
    for _ in range(k):
        out = out @ P
    return out


def power_by_squaring(P: np.ndarray, k: int) -> np.ndarray:
    out, base = np.eye(len(P)), np.array(P, dtype=float)
    while k:
        if k & 1:
            out = out @ base
        base = base @ base
        k >>= 1
    return out


def chapman_kolmogorov_check(chain: MarkovChainModel, m: int, n: int) -> float:
    """max |P^(m+n) - P^m P^n| with the two sides computed by different routes."""
    if m < 0 or n < 0:
        raise ValueError("m and n must be nonnegative")
    lhs = power_by_squaring(chain.P, m + n)
    rhs = naive_power(chain.P, m) @ naive_power(chain.P, n)
    return float(np.max(np.abs(lhs - rhs)))


def _normalize(v: np.ndarray) -> np.ndarray:
    v = v / np.max(np.abs(v))
    first = v[np.flatnonzero(np.abs(v) > EIGEN_TOL)[0]]
    return v if first > 0 else -v


def null_space(A: np.ndarray, tol: float = 1e-10) -> list[np.ndarray]:
    """Basis of {v : A v = 0} from a row-echelon form with partial pivoting."""
    R = np.array(A, dtype=float)
    rows, cols = R.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[p, c]) <= tol:
            continue
        R[[r, p]] = R[[p, r]]
        R[r] = R[r] / R[r, c]
        for i in range(rows):
            if i != r and R[i, c] != 0.0:
                R[i] = R[i] - R[i, c] * R[r]
        pivots.append(c)
        r += 1
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = np.zeros(cols)
        v[f] = 1.0
        for i, pc in enumerate(pivots):
            v[pc] = -R[i, f]
        basis.append(v)
    return basis


def solve_harmonic(chain: MarkovChainModel) -> list[np.ndarray]:
    """Basis of harmonic functions (P phi = phi), each scaled to max |entry| = 1."""
    basis = [_normalize(v) for v in null_space(chain.P - np.eye(chain.n))]
    for v in basis:
        res = float(np.max(np.abs(chain.P @ v - v)))
        if res > EIGEN_TOL:
            raise NotAnEigenpair(f"harmonic residual {res} above tolerance")
    return basis


def verify_eigenpair(chain: MarkovChainModel, lam: float, phi) -> float:
    """||P phi - lam phi||_inf / ||phi||_inf."""
    phi = np.asarray(phi, dtype=float)
    norm = float(np.max(np.abs(phi), initial=0.0))
    if norm == 0.0:
        raise ZeroVector("eigenvector must be nonzero")
    return float(np.max(np.abs(chain.P @ phi - lam * phi))) / norm


def inverse_iteration(chain: MarkovChainModel, guess: float, iters: int = 200,
                      tol: float = EIGEN_TOL) -> tuple[float, np.ndarray]:
    """Refine an eigenpair near ``guess``; raises NotAnEigenpair if the residual stays high."""
    n = chain.n
    shift = guess + 1e-9
    A = chain.P - shift * np.eye(n)
    v = np.ones(n) + np.linspace(0.0, 1.0, n)
    lam = guess
    for _ in range(iters):
        w = np.linalg.solve(A, v)
        v = w / np.max(np.abs(w))
        lam = float(v @ (chain.P @ v) / (v @ v))
        if verify_eigenpair(chain, lam, v) <= tol:
            return lam, _normalize(v)
    raise NotAnEigenpair(f"inverse iteration near {guess} did not converge")


# ---------------------------------------------------------------------------
# path models: what a prefix looks like and how it branches


@dataclass(frozen=True, eq=False)
class IIDIncrements:
    """Finite-support increment law; paths start at X0 = 0."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v, p = _frozen(self.values), _frozen(self.probs)
        if v.shape != p.shape or v.ndim != 1 or len(v) == 0:
            raise InvalidChain("increment values and probabilities must align")
        if np.any(p < 0) or abs(math.fsum(p) - 1.0) > ROW_TOL:
            raise InvalidChain("increment probabilities must sum to 1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    def mean(self) -> float:
        return math.fsum(self.values * self.probs)

    def mgf(self, lam: float) -> float:
        return math.fsum(np.exp(lam * self.values) * self.probs)

    # path model protocol
    def roots(self):
        return [((0.0,), 1.0)]

    def children(self, prefix):
        return [(float(v), float(p)) for v, p in zip(self.values, self.probs) if p > 0]

    @property
    def branching(self) -> int:
        return int(np.count_nonzero(self.probs))


class ChainPaths:
    """Path model of a chain: prefixes are tuples of state indices."""

    def __init__(self, chain: MarkovChainModel):
        self.chain = chain

    def roots(self):
        return [((i,), float(p)) for i, p in enumerate(self.chain.initial) if p > 0]

    def children(self, prefix):
        row = self.chain.P[prefix[-1]]
        return [(j, float(p)) for j, p in enumerate(row) if p > 0]

    @property
    def branching(self) -> int:
        return self.chain.n


def path_model(underlying):
    if isinstance(underlying, MarkovChainModel):
        return ChainPaths(underlying)
    return underlying


@dataclass
class PathTree:
    """All positive-probability prefixes up to ``horizon`` steps, level by level."""

    horizon: int
    levels: list = field(default_factory=list)

    @classmethod
    def build(cls, model, horizon: int, cap: int = TREE_CAP) -> PathTree:
        model = path_model(model)
        roots = model.roots()
        bound = len(roots) * sum(model.branching ** k for k in range(horizon + 1))
        if bound > cap:
            raise TreeTooLarge(f"path tree may hold {bound} nodes, cap is {cap}")
        levels = [roots]
        for _ in range(horizon):
            nxt = []
            for prefix, p in levels[-1]:
                for s, q in model.children(prefix):
                    nxt.append((prefix + (s,), p * q))
            levels.append(nxt)
        return cls(horizon, levels)

    def level_mass(self, k: int) -> float:
        return math.fsum(p for _, p in self.levels[k])


# ---------------------------------------------------------------------------
# processes


class Process:
    """Y_n evaluated on a prefix of length n + 1."""

    name = "process"

    def __init__(self, underlying):
        self.underlying = underlying
        self.model = path_model(underlying)

    def value(self, prefix) -> float:
        raise NotImplementedError

    def check_prefix(self, prefix) -> None:
        """Hook for per-node constraints such as declared bounds."""


class HarmonicMG(Process):
    name = "harmonic"

    def __init__(self, chain: MarkovChainModel, phi, unchecked: bool = False):
        super().__init__(chain)
        self.phi = np.asarray(phi, dtype=float)
        if not unchecked:
            res = verify_eigenpair(chain, 1.0, self.phi)
            if res > EIGEN_TOL:
                raise NotAnEigenpair(f"phi is not harmonic (residual {res:.3g})")

    def value(self, prefix):
        return float(self.phi[prefix[-1]])


class EigenMG(Process):
    """Y_n = lam^-n phi(X_n)."""

    name = "eigen"

    def __init__(self, chain: MarkovChainModel, lam: float, phi, unchecked: bool = False):
        super().__init__(chain)
        if lam == 0:
            raise ZeroLambda("eigenvalue must be nonzero")
        self.lam = float(lam)
        self.phi = np.asarray(phi, dtype=float)
        if not unchecked:
            res = verify_eigenpair(chain, self.lam, self.phi)
            if res > EIGEN_TOL:
                raise NotAnEigenpair(f"({lam}, phi) is not an eigenpair (residual {res:.3g})")

    def value(self, prefix):
        n = len(prefix) - 1
        return self.lam ** (-n) * float(self.phi[prefix[-1]])


class RandomWalk(Process):
    """S_n = xi_1 + ... + xi_n."""

    name = "random_walk"

    def __init__(self, increments: IIDIncrements, unchecked: bool = False):
        super().__init__(increments)
        mean = increments.mean()
        if not unchecked and abs(mean) > MARTINGALE_TOL:
            raise NonZeroMeanIncrement(f"increment mean is {mean}, must be 0")

    def value(self, prefix):
        return math.fsum(prefix[1:])


class WaldMG(Process):
    """Y_n = mgf(lam)^-n exp(lam S_n)."""

    name = "wald"

    def __init__(self, increments: IIDIncrements, lam: float):
        super().__init__(increments)
        if lam == 0:
            raise ZeroLambda("Wald parameter must be nonzero")
        self.lam = float(lam)
        self.mgf = increments.mgf(self.lam)

    def value(self, prefix):
        n = len(prefix) - 1
        return self.mgf ** (-n) * math.exp(self.lam * math.fsum(prefix[1:]))


class Transform(Process):
    """Y_n = sum_k V_k xi_k with V_k a function of the prefix before step k.

    ``rule(prefix)`` receives (x_0, xi_1, ..., xi_{k-1}) and returns V_k;
    ``bound`` is the declared constant C with |V_k| <= C checked on the tree.
    """

    name = "transform"

    def __init__(self, increments: IIDIncrements, rule: Callable, bound: float,
                 unchecked: bool = False):
        super().__init__(increments)
        mean = increments.mean()
        if not unchecked and abs(mean) > MARTINGALE_TOL:
            raise NonZeroMeanIncrement(f"increment mean is {mean}, must be 0")
        self.rule = rule
        self.bound = float(bound)

    def stake(self, prefix) -> float:
        return float(self.rule(tuple(prefix)))

    def value(self, prefix):
        return math.fsum(self.stake(prefix[:k]) * prefix[k] for k in range(1, len(prefix)))

    def check_prefix(self, prefix):
        v = self.stake(prefix)
        if abs(v) > self.bound:
            raise BoundExceeded(f"|V| = {abs(v)} exceeds declared bound {self.bound} at {prefix}")


def _losing_streak(steps) -> int:
    n = 0
    for x in reversed(steps):
        if x >= 0:
            break
        n += 1
    return n


TRANSFORM_RULES = {
    "constant": lambda c: (lambda prefix: c),
    # double after each loss in the current losing streak, back to c after a win
    "double_after_loss": lambda c: (lambda prefix: c * 2.0 ** _losing_streak(prefix[1:])),
    "sign_of_last": lambda c: (lambda prefix: c * (1.0 if len(prefix) < 2 or prefix[-1] >= 0 else -1.0)),
}


class DoobMG(Process):
    """Y_n(prefix) = E[terminal | prefix], by exact summation over extensions."""

    name = "doob"

    def __init__(self, underlying, terminal: Callable, horizon: int, cap: int = TREE_CAP):
        super().__init__(underlying)
        self.horizon = horizon
        self.terminal = terminal
        tree = PathTree.build(underlying, horizon, cap)
        table = {prefix: float(terminal(prefix)) for prefix, _ in tree.levels[horizon]}
        for k in range(horizon - 1, -1, -1):
            for prefix, _ in tree.levels[k]:
                kids = self.model.children(prefix)
                table[prefix] = math.fsum(q * table[prefix + (s,)] for s, q in kids)
        self.table = table

    def value(self, prefix):
        return self.table[tuple(prefix)]


class Differences(Process):
    """D_n = Y_n - Y_{n-1}, D_0 = Y_0."""

    def __init__(self, base: Process):
        super().__init__(base.underlying)
        self.base = base
        self.name = f"diff({base.name})"

    def value(self, prefix):
        if len(prefix) == 1:
            return self.base.value(prefix)
        return self.base.value(prefix) - self.base.value(prefix[:-1])


class FunctionProcess(Process):
    """Arbitrary Y_n given as a callable on prefixes."""

    name = "custom"

    def __init__(self, underlying, fn: Callable):
        super().__init__(underlying)
        self.fn = fn

    def value(self, prefix):
        return float(self.fn(tuple(prefix)))


TERMINALS = {
    "sum": lambda prefix: math.fsum(prefix[1:]),
    "product": lambda prefix: math.prod(prefix[1:]),
    "max_partial_sum": lambda prefix: max(np.cumsum((0.0,) + tuple(prefix[1:]))),
}


def make_martingale(kind: str, underlying, **params) -> Process:
    """Build one of the named constructions; parameters are validated per kind."""
    if kind == "harmonic":
        return HarmonicMG(underlying, params["phi"], params.get("unchecked", False))
    if kind == "eigen":
        return EigenMG(underlying, params["lam"], params["phi"], params.get("unchecked", False))
    if kind == "doob":
        terminal = params["terminal"]
        if isinstance(terminal, str):
            terminal = TERMINALS[terminal]
        return DoobMG(underlying, terminal, params["horizon"], params.get("cap", TREE_CAP))
    if kind == "wald":
        return WaldMG(underlying, params["lam"])
    if kind == "random_walk":
        return RandomWalk(underlying, params.get("unchecked", False))
    if kind == "transform":
        rule = params["rule"]
        if isinstance(rule, str):
            rule = TRANSFORM_RULES[rule](float(params.get("stake", 1.0)))
        return Transform(underlying, rule, params["bound"], params.get("unchecked", False))
    raise ValueError(f"unknown martingale kind {kind!r}")


# ---------------------------------------------------------------------------
# exact verification


@dataclass
class MartingaleReport:
    classification: str
    max_residual: float
    min_gap: float
    max_gap: float
    means: list
    mean_residual: float
    n_prefixes: int
    horizon: int
    tol: float
    gaps: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.classification == "martingale" and self.mean_residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "max_residual": self.max_residual,
            "min_gap": self.min_gap,
            "max_gap": self.max_gap,
            "means": self.means,
            "mean_residual": self.mean_residual,
            "n_prefixes": self.n_prefixes,
            "horizon": self.horizon,
            "pass": self.passed,
        }


def classify(gaps: Sequence[float], tol: float) -> str:
    if all(abs(g) <= tol for g in gaps):
        return "martingale"
    if all(g >= -tol for g in gaps):
        return "submartingale"
    if all(g <= tol for g in gaps):
        return "supermartingale"
    return "neither"


def _one_step_gaps(process: Process, tree: PathTree, target: Callable[[tuple], float]):
    """For every prefix below the horizon: E[Y_{n+1} | prefix] - target(prefix)."""
    gaps = []
    for k in range(tree.horizon):
        for prefix, _ in tree.levels[k]:
            process.check_prefix(prefix)
            kids = process.model.children(prefix)
            cond = math.fsum(q * process.value(prefix + (s,)) for s, q in kids)
            gaps.append((prefix, cond - target(prefix)))
    return gaps


def verify_martingale_exact(process: Process, horizon: int, tol: float = MARTINGALE_TOL,
                            cap: int = TREE_CAP) -> MartingaleReport:
    """Check E[Y_{n+1} | prefix] against Y_n at every positive-probability prefix."""
    tree = PathTree.build(process.model, horizon, cap)
    gaps = _one_step_gaps(process, tree, process.value)
    values = [g for _, g in gaps]
    means = [math.fsum(p * process.value(prefix) for prefix, p in level) for level in tree.levels]
    mean_res = max((abs(m - means[0]) for m in means), default=0.0)
    return MartingaleReport(
        classification=classify(values, tol),
        max_residual=max((abs(g) for g in values), default=0.0),
        min_gap=min(values, default=0.0),
        max_gap=max(values, default=0.0),
        means=means,
        mean_residual=mean_res,
        n_prefixes=len(values),
        horizon=horizon,
        tol=tol,
        gaps=gaps,
    )


def verify_differences(process: Process, horizon: int, tol: float = MARTINGALE_TOL,
                       cap: int = TREE_CAP) -> MartingaleReport:
    """E[D_{n+1} | prefix] = 0 at every prefix, with D the difference process."""
    diffs = Differences(process)
    tree = PathTree.build(process.model, horizon, cap)
    gaps = _one_step_gaps(diffs, tree, lambda prefix: 0.0)
    values = [g for _, g in gaps]
    means = [math.fsum(p * diffs.value(prefix) for prefix, p in level) for level in tree.levels]
    return MartingaleReport(
        classification=classify(values, tol),
        max_residual=max((abs(g) for g in values), default=0.0),
        min_gap=min(values, default=0.0),
        max_gap=max(values, default=0.0),
        means=means,
        mean_residual=max((abs(m) for m in means[1:]), default=0.0),
        n_prefixes=len(values),
        horizon=horizon,
        tol=tol,
        gaps=gaps,
    )
