"""Numeric semantics of P-brackets on finite spaces.

Every operator here is diagonal in the outcome basis, so a bracket
P(A | op_1 ... op_k | B) reduces to a weighted sum over the outcomes in
A and B of the product of the diagonal factors.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from pbn.dims import DIMENSIONLESS, Dimension
from pbn.errors import (
    SpaceMismatch,
    TypeMismatch,
    ZeroProbabilityAtom,
    ZeroProbabilityCondition,
)
from pbn.space import (
    EXACT_TOL,
    Event,
    Partition,
    RandomVariable,
    SampleSpace,
    event_prob,
    sigma_of_rvs,
)


@dataclass(frozen=True, eq=False)
class Observable:
    rv: RandomVariable

    def diagonal(self, space: SampleSpace) -> np.ndarray:
        self.rv.check(space)
        return self.rv.values


@dataclass(frozen=True, eq=False)
class Indicator:
    event: Event

    def diagonal(self, space: SampleSpace) -> np.ndarray:
        return space.mask(self.event).astype(float)


@dataclass(frozen=True, eq=False)
class FunctionOf:
    """g(X): a scalar function applied pointwise to an observable."""

    rv: RandomVariable
    fn: Callable[[np.ndarray], np.ndarray]
    fn_name: str = "g"

    def diagonal(self, space: SampleSpace) -> np.ndarray:
        self.rv.check(space)
        return np.asarray(self.fn(self.rv.values), dtype=float)


@dataclass(frozen=True)
class Identity:
    def diagonal(self, space: SampleSpace) -> np.ndarray:
        return np.ones(space.size)


Operator = Union[Observable, Indicator, FunctionOf, Identity]
OperatorLike = Union[Operator, RandomVariable]


def as_operator(x: OperatorLike) -> Operator:
    if isinstance(x, RandomVariable):
        return Observable(x)
    if isinstance(x, (Observable, Indicator, FunctionOf, Identity)):
        return x
    raise TypeMismatch(f"{x!r} is not an operator")


@dataclass(frozen=True)
class BracketValue:
    value: float | complex
    dimension: Dimension = field(default=DIMENSIONLESS)

    def __float__(self) -> float:
        return float(self.value)


def _cond_masses(space: SampleSpace, ket: Event) -> np.ndarray:
    """P(x_i | ket) for every outcome."""
    pk = event_prob(space, ket)
    if pk <= 0.0:
        raise ZeroProbabilityCondition(f"conditioning event has probability {pk}")
    w = np.where(space.mask(ket), space.weights, 0.0)
    return w / pk


def eval_bracket(space: SampleSpace, bra: Event, ops: Sequence[OperatorLike], ket: Event,
                 dimension: Dimension = DIMENSIONLESS) -> BracketValue:
    """P(bra | ops | ket) = sum_i [x_i in bra] * prod_k op_k(x_i) * P(x_i | ket)."""
    cond = _cond_masses(space, ket)
    factor = np.where(space.mask(bra), 1.0, 0.0)
    for op in ops:
        factor = factor * as_operator(op).diagonal(space)
    terms = factor * cond
    return BracketValue(math.fsum(terms[i] for i in range(space.size) if cond[i] != 0.0), dimension)


def expectation(space: SampleSpace, op: OperatorLike) -> float:
    """<g(X)> = P(Omega | g(X) | Omega)."""
    return eval_bracket(space, space.full(), [op], space.full()).value


def cond_expectation_event(space: SampleSpace, x: OperatorLike, h: Event) -> float:
    """E[X | H] = P(Omega | X | H)."""
    return eval_bracket(space, space.full(), [x], h).value


def cond_expectation_given_partition(space: SampleSpace, x: OperatorLike, b: Partition,
                                     tol: float = EXACT_TOL) -> RandomVariable:
    """Atom-wise conditional mean, checked against <X I_B> = <Z I_B> on every atom."""
    b.check(space)
    op = as_operator(x)
    diag = op.diagonal(space)
    z = np.empty(space.size)
    for k, atom in enumerate(b.atoms):
        ev = Event(atom)
        if event_prob(space, ev) <= 0.0:
            raise ZeroProbabilityAtom(f"atom {k} ({sorted(atom)}) has zero probability")
        z[list(atom)] = cond_expectation_event(space, op, ev)
    zr = RandomVariable(z, f"E[{_op_name(op)}|B]")
    scale = max(1.0, float(np.max(np.abs(diag), initial=0.0)))
    for atom in b.atoms:
        ind = Indicator(Event(atom))
        lhs = eval_bracket(space, space.full(), [op, ind], space.full()).value
        rhs = eval_bracket(space, space.full(), [zr, ind], space.full()).value
        if abs(lhs - rhs) > tol * scale:
            raise AssertionError(f"orthogonality violated on atom {sorted(atom)}: {lhs} vs {rhs}")
    return zr


def cond_expectation_given_rv(space: SampleSpace, g_of_x: OperatorLike,
                              *ys: RandomVariable) -> RandomVariable:
    """omega -> E[g(X) | Y = Y(omega)], constant on the level sets of Y."""
    part = sigma_of_rvs(space, *ys)
    for atom in part.atoms:
        if event_prob(space, Event(atom)) <= 0.0:
            i = next(iter(atom))
            vals = tuple(float(y.values[i]) for y in ys)
            raise ZeroProbabilityCondition(f"level set {vals} has zero probability")
    return cond_expectation_given_partition(space, g_of_x, part)


def characteristic_function(space: SampleSpace, x: RandomVariable, k: float) -> complex:
    """<exp(i k X)>."""
    x.check(space)
    terms = [cmath.exp(1j * k * v) * m for v, m in zip(x.values.tolist(), space.weights.tolist())]
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def commutator_check(space: SampleSpace, x: RandomVariable, y: RandomVariable) -> float:
    """max_i |(XY - YX)|x_i)| applying the operators in both orders to each base ket."""
    x.check(space)
    y.check(space)
    worst = 0.0
    for xv, yv in zip(x.values.tolist(), y.values.tolist()):
        xy = xv * (yv * 1.0)
        yx = yv * (xv * 1.0)
        worst = max(worst, abs(xy - yx))
    return worst


def _op_name(op: Operator) -> str:
    if isinstance(op, Observable):
        return op.rv.name
    if isinstance(op, FunctionOf):
        return f"{op.fn_name}({op.rv.name})"
    if isinstance(op, Indicator):
        return "I"
    return "1"


@dataclass
class CheckResult:
    """One row of a verification report."""

    property: str
    lhs: float
    rhs: float
    residual: float
    passed: bool
    paper_ref: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "property": self.property,
            "lhs": _jsonable(self.lhs),
            "rhs": _jsonable(self.rhs),
            "residual": float(self.residual),
            "pass": bool(self.passed),
            "paper_ref": self.paper_ref,
        }
        out.update(self.extra)
        return out


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if v is None:
        return None
    return float(v)


def _row(name, lhs, rhs, ref, tol):
    """Scalar or pointwise comparison; lhs/rhs may be arrays."""
    la, ra = np.atleast_1d(np.asarray(lhs, dtype=float)), np.atleast_1d(np.asarray(rhs, dtype=float))
    residual = float(np.max(np.abs(la - ra), initial=0.0))
    worst = int(np.argmax(np.abs(la - ra))) if la.size > 1 else 0
    return CheckResult(name, float(la[worst]), float(ra[worst]), residual, residual <= tol, ref)


def indicator_identities(space: SampleSpace, x: RandomVariable, a: Event, b: Event,
                         tol: float = EXACT_TOL) -> list[CheckResult]:
    """Both sides of the indicator-operator identities for the given X, A, B."""
    full = space.full()
    rows = [
        _row("mean of indicator equals probability",
             expectation(space, Indicator(a)), event_prob(space, a),
             "P(A|Omega) = P(Omega|I_A|Omega)", tol),
        _row("indicator inserted as projector",
             eval_bracket(space, full, [Indicator(a)], full).value,
             eval_bracket(space, a, [], full).value,
             "P(Omega|I_A|Omega) = P(A|Omega)", tol),
    ]
    if event_prob(space, b) > 0:
        rows.append(_row("<X I_B> = P(B) E[X|B]",
                         eval_bracket(space, full, [x, Indicator(b)], full).value,
                         event_prob(space, b) * cond_expectation_event(space, x, b),
                         "P(Omega|X I_B|Omega) = P(B|Omega)P(Omega|X|B)", tol))
        rows.append(_row("E[I_A|B] = P(A|B)",
                         eval_bracket(space, full, [Indicator(a)], b).value,
                         eval_bracket(space, a, [], b).value,
                         "P(Omega|I_A|B) = P(A|B)", tol))
    else:
        raise ZeroProbabilityCondition("event B has zero probability")
    return rows
