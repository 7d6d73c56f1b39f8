"""Finite sample spaces, events, random variables and sigma-fields as partitions.

A sigma-field is carried around as its generating partition: every member of
the field is a union of atoms, so the atoms are all we ever need to store.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from pbn.errors import (
    DuplicateLabel,
    IndexOutOfRange,
    InvalidFiltration,
    InvalidPartition,
    NegativeWeight,
    NotNormalized,
    SizeOverflow,
    SpaceMismatch,
)

EXACT_TOL = 1e-12
NORMALIZATION_TOL = 1e-12
PRODUCT_CAP = 10**6


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampleSpace:
    """Ordered outcomes with probability masses.

    ``bin_widths`` is set only for discretized continuous spaces; the mass of
    each outcome is then density times bin volume.
    """

    labels: tuple
    weights: np.ndarray
    bin_widths: tuple | None = None

    @property
    def size(self) -> int:
        return len(self.labels)

    def full(self) -> Event:
        return Event(frozenset(range(self.size)))

    def empty(self) -> Event:
        return Event(frozenset())

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise IndexOutOfRange(f"no outcome labelled {label!r}") from None

    def event(self, members: Iterable[int]) -> Event:
        ev = Event(frozenset(int(i) for i in members))
        ev.check(self)
        return ev

    def event_of_labels(self, labels: Iterable) -> Event:
        return Event(frozenset(self.index(lab) for lab in labels))

    def mask(self, event: Event) -> np.ndarray:
        event.check(self)
        m = np.zeros(self.size, dtype=bool)
        m[list(event.members)] = True
        return m

    def rv(self, values, name: str = "X") -> RandomVariable:
        rv = RandomVariable(_frozen_array(values), name)
        rv.check(self)
        return rv

    def compatible(self, other: SampleSpace) -> bool:
        if self is other:
            return True
        return self.labels == other.labels and np.array_equal(self.weights, other.weights)


def build_space(labels: Sequence, weights: Sequence[float], bin_widths=None,
                normalize: bool = False) -> SampleSpace:
    """Validate and freeze a sample space.

    Weights must already sum to one (within 1e-12) unless ``normalize`` is set.
    """
    labels = tuple(str(lab) for lab in labels)
    w = np.array(weights, dtype=float).ravel()
    if len(labels) != len(w):
        raise SpaceMismatch(f"{len(labels)} labels but {len(w)} weights")
    if len(set(labels)) != len(labels):
        seen, dups = set(), []
        for lab in labels:
            if lab in seen:
                dups.append(lab)
            seen.add(lab)
        raise DuplicateLabel(f"duplicate outcome labels: {dups}")
    if not np.all(np.isfinite(w)):
        raise NegativeWeight("weights must be finite")
    if np.any(w < 0):
        raise NegativeWeight(f"negative weight at index {int(np.argmax(w < 0))}")
    total = math.fsum(w)
    if normalize:
        if total <= 0:
            raise NotNormalized("cannot normalize weights with zero total")
        w = w / total
    elif abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"weights sum to {total!r}, not 1")
    if bin_widths is not None:
        bin_widths = tuple(float(b) for b in np.atleast_1d(bin_widths))
        if any(not (b > 0) for b in bin_widths):
            raise NegativeWeight("bin widths must be positive")
    return SampleSpace(labels, _frozen_array(w), bin_widths)


def discretize(density: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
               n_bins: int, normalize: bool = True) -> tuple[SampleSpace, RandomVariable]:
    """Uniform grid of bin centres on [lo, hi] with mass density(x) * dx.

    Returns the space and the coordinate random variable.
    """
    centres = np.linspace(lo, hi, n_bins)
    dx = (hi - lo) / (n_bins - 1)
    mass = np.asarray(density(centres), dtype=float) * dx
    labels = [f"{c:.12g}" for c in centres]
    space = build_space(labels, mass, bin_widths=(dx,), normalize=normalize)
    return space, space.rv(centres, "x")


@dataclass(frozen=True)
class Event:
    members: frozenset

    @classmethod
    def of(cls, members: Iterable[int]) -> Event:
        return cls(frozenset(int(i) for i in members))

    def check(self, space: SampleSpace) -> None:
        for i in self.members:
            if not 0 <= i < space.size:
                raise IndexOutOfRange(f"outcome index {i} outside 0..{space.size - 1}")

    def __and__(self, other: Event) -> Event:
        return Event(self.members & other.members)

    def __or__(self, other: Event) -> Event:
        return Event(self.members | other.members)

    def complement(self, space: SampleSpace) -> Event:
        return Event(frozenset(range(space.size)) - self.members)

    def __len__(self) -> int:
        return len(self.members)

    def sorted(self) -> list[int]:
        return sorted(self.members)


@dataclass(frozen=True, eq=False)
class RandomVariable:
    """Real function on outcomes, stored as one value per outcome."""

    values: np.ndarray
    name: str = "X"

    def __post_init__(self):
        if not isinstance(self.values, np.ndarray) or self.values.flags.writeable:
            object.__setattr__(self, "values", _frozen_array(self.values))

    def __len__(self) -> int:
        return len(self.values)

    def check(self, space: SampleSpace) -> None:
        if len(self.values) != space.size:
            raise SpaceMismatch(
                f"random variable {self.name!r} has {len(self.values)} values, "
                f"space has {space.size} outcomes")

    def apply(self, fn: Callable, name: str | None = None) -> RandomVariable:
        return RandomVariable(fn(self.values), name or f"f({self.name})")

    def _binary(self, other, op, sym):
        if isinstance(other, RandomVariable):
            if len(other) != len(self):
                raise SpaceMismatch("random variables live on different spaces")
            return RandomVariable(op(self.values, other.values), f"({self.name}{sym}{other.name})")
        return RandomVariable(op(self.values, float(other)), f"({self.name}{sym}{other})")

    def __add__(self, other):
        return self._binary(other, np.add, "+")

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract, "-")

    def __rsub__(self, other):
        return RandomVariable(float(other) - self.values, f"({other}-{self.name})")

    def __mul__(self, other):
        return self._binary(other, np.multiply, "*")

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide, "/")

    def __neg__(self):
        return RandomVariable(-self.values, f"-{self.name}")

    def allclose(self, other: RandomVariable, tol: float = EXACT_TOL) -> bool:
        return bool(np.max(np.abs(self.values - other.values), initial=0.0) <= tol)


def constant_rv(space: SampleSpace, c: float, name: str | None = None) -> RandomVariable:
    return RandomVariable(np.full(space.size, float(c)), name or repr(float(c)))


def indicator_rv(space: SampleSpace, event: Event, name: str = "I") -> RandomVariable:
    return RandomVariable(space.mask(event).astype(float), name)


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty atoms covering ``range(n)``; validated on construction."""

    atoms: tuple
    n: int = field(default=-1)

    def __post_init__(self):
        atoms = tuple(frozenset(int(i) for i in a) for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        n = self.n if self.n >= 0 else sum(len(a) for a in atoms)
        object.__setattr__(self, "n", n)
        seen: set = set()
        for k, atom in enumerate(atoms):
            if not atom:
                raise InvalidPartition(f"atom {k} is empty")
            if seen & atom:
                raise InvalidPartition(f"atom {k} overlaps an earlier atom at {sorted(seen & atom)}")
            bad = [i for i in atom if not 0 <= i < n]
            if bad:
                raise InvalidPartition(f"atom {k} has out-of-range indices {sorted(bad)}")
            seen |= atom
        if len(seen) != n:
            missing = sorted(set(range(n)) - seen)
            raise InvalidPartition(f"atoms do not cover outcomes {missing}")

    @classmethod
    def from_labels(cls, labels: Sequence) -> Partition:
        """Group outcomes by label, atoms ordered by first occurrence."""
        groups: dict = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        return cls(tuple(groups.values()), len(labels))

    @classmethod
    def trivial(cls, n: int) -> Partition:
        return cls((range(n),), n)

    @classmethod
    def finest(cls, n: int) -> Partition:
        return cls(tuple((i,) for i in range(n)), n)

    def events(self) -> list[Event]:
        return [Event(a) for a in self.atoms]

    def atom_index(self) -> np.ndarray:
        """Atom number of every outcome."""
        idx = np.empty(self.n, dtype=int)
        for k, atom in enumerate(self.atoms):
            idx[list(atom)] = k
        return idx

    def check(self, space: SampleSpace) -> None:
        if self.n != space.size:
            raise SpaceMismatch(f"partition covers {self.n} outcomes, space has {space.size}")

    def measurable(self, rv: RandomVariable) -> bool:
        """True when ``rv`` is constant on every atom."""
        v = rv.values
        return all(np.all(v[list(a)] == v[next(iter(a))]) for a in self.atoms)

    def coarsen(self, groups: Sequence[Sequence[int]]) -> Partition:
        """Merge atoms: ``groups`` lists atom numbers forming each new atom."""
        return Partition(tuple(frozenset().union(*(self.atoms[k] for k in g)) for g in groups), self.n)


def sigma_of_rvs(space: SampleSpace, *rvs: RandomVariable) -> Partition:
    """Generating partition of sigma(X, Y, ...): the joint level sets."""
    if not rvs:
        return Partition.trivial(space.size)
    for rv in rvs:
        rv.check(space)
    keys = list(zip(*(rv.values.tolist() for rv in rvs)))
    return Partition.from_labels(keys)


def join(*partitions: Partition) -> Partition:
    """Coarsest common refinement of the given partitions."""
    n = partitions[0].n
    if any(p.n != n for p in partitions):
        raise SpaceMismatch("partitions cover different spaces")
    idx = [p.atom_index().tolist() for p in partitions]
    return Partition.from_labels(list(zip(*idx)))


def is_refinement(coarse: Partition, fine: Partition) -> bool:
    """True iff every atom of ``fine`` lies inside one atom of ``coarse``."""
    if coarse.n != fine.n:
        raise SpaceMismatch(f"partitions cover {coarse.n} and {fine.n} outcomes")
    owner = coarse.atom_index()
    return all(len({owner[i] for i in atom}) == 1 for atom in fine.atoms)


@dataclass(frozen=True)
class Filtration:
    """Refinement chain of partitions: stage k+1 refines stage k."""

    stages: tuple

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        for k in range(len(stages) - 1):
            if not is_refinement(stages[k], stages[k + 1]):
                raise InvalidFiltration(f"stage {k + 1} does not refine stage {k}")

    def __len__(self) -> int:
        return len(self.stages)

    def __getitem__(self, k: int) -> Partition:
        return self.stages[k]

    def adapted(self, process: Sequence[RandomVariable]) -> bool:
        """Is the k-th variable measurable on the k-th stage for every k?"""
        return all(st.measurable(rv) for st, rv in zip(self.stages, process))


def natural_filtration(space: SampleSpace, process: Sequence[RandomVariable]) -> Filtration:
    return Filtration(tuple(sigma_of_rvs(space, *process[: k + 1]) for k in range(len(process))))


def event_prob(space: SampleSpace, event: Event) -> float:
    event.check(space)
    return math.fsum(space.weights[i] for i in sorted(event.members))


class IndependenceResult(NamedTuple):
    independent: bool
    residual: float


def check_independence(space: SampleSpace, a: Event, b: Event,
                       tol: float = EXACT_TOL) -> IndependenceResult:
    pab = event_prob(space, a & b)
    residual = abs(pab - event_prob(space, a) * event_prob(space, b))
    return IndependenceResult(residual <= tol, residual)


@dataclass(frozen=True)
class Embedding:
    """Index bookkeeping for a two-factor product space (row-major)."""

    n1: int
    n2: int

    def pair(self, k: int) -> tuple[int, int]:
        return divmod(k, self.n2)

    def lift_event(self, event: Event, factor: int) -> Event:
        if factor == 1:
            return Event(frozenset(i * self.n2 + j for i in event.members for j in range(self.n2)))
        return Event(frozenset(i * self.n2 + j for i in range(self.n1) for j in event.members))

    def lift_rv(self, rv: RandomVariable, factor: int) -> RandomVariable:
        if factor == 1:
            return RandomVariable(np.repeat(rv.values, self.n2), rv.name)
        return RandomVariable(np.tile(rv.values, self.n1), rv.name)

    def lift_partition(self, part: Partition, factor: int) -> Partition:
        return Partition(tuple(self.lift_event(Event(a), factor).members for a in part.atoms),
                         self.n1 * self.n2)

    def marginal(self, weights: np.ndarray, factor: int) -> np.ndarray:
        grid = np.asarray(weights).reshape(self.n1, self.n2)
        return grid.sum(axis=1 if factor == 1 else 0)


def product_space(s1: SampleSpace, s2: SampleSpace,
                  cap: int = PRODUCT_CAP) -> tuple[SampleSpace, Embedding]:
    if s1.size * s2.size > cap:
        raise SizeOverflow(f"product of {s1.size} x {s2.size} outcomes exceeds cap {cap}")
    labels = [f"({a}, {b})" for a in s1.labels for b in s2.labels]
    weights = np.outer(s1.weights, s2.weights).ravel()
    widths = None
    if s1.bin_widths is not None and s2.bin_widths is not None:
        widths = s1.bin_widths + s2.bin_widths
    space = SampleSpace(tuple(labels), _frozen_array(weights), widths)
    if len(set(labels)) != len(labels):
        raise DuplicateLabel("product labels collide")
    return space, Embedding(s1.size, s2.size)


def random_space(rng: np.random.Generator, n: int, name: str = "w") -> SampleSpace:
    """Strictly positive Dirichlet weights on ``n`` outcomes."""
    w = rng.dirichlet(np.ones(n))
    w = np.maximum(w, 1e-3)
    return build_space([f"{name}{i}" for i in range(n)], w, normalize=True)


def random_partition(rng: np.random.Generator, n: int, max_atoms: int | None = None) -> Partition:
    k = int(rng.integers(1, (max_atoms or n) + 1))
    labels = rng.integers(0, k, size=n)
    return Partition.from_labels(labels.tolist())
