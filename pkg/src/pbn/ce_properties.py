"""Verifier for the conditional-expectation identities on a finite space.

Each property is evaluated on both sides by enumeration and reported as a
:class:`~pbn.bracket.CheckResult`.  Inputs not supplied by the caller are
drawn from a seeded generator so reports are reproducible.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from pbn.bracket import (
    CheckResult,
    _row,
    cond_expectation_event,
    cond_expectation_given_partition,
    cond_expectation_given_rv,
    expectation,
)
from pbn.errors import InvalidFiltration
from pbn.space import (
    EXACT_TOL,
    Event,
    Partition,
    RandomVariable,
    SampleSpace,
    is_refinement,
    product_space,
    random_partition,
    random_space,
    sigma_of_rvs,
)


def g_square(v):
    return v * v


def g_cos(v):
    return np.cos(v)


def h_affine(v):
    return 1.0 + 0.5 * v


def _discrete_rv(rng, n, name, levels=3):
    return RandomVariable(rng.integers(0, levels, size=n).astype(float), name)


def _measurable_on(rng, part: Partition, name: str) -> RandomVariable:
    per_atom = rng.uniform(-2, 2, size=len(part.atoms))
    return RandomVariable(per_atom[part.atom_index()], name)


def _random_coarsening(rng, part: Partition) -> Partition:
    k = len(part.atoms)
    groups_of = rng.integers(0, max(1, k // 2), size=k)
    groups: dict = {}
    for atom_no, g in enumerate(groups_of.tolist()):
        groups.setdefault(g, []).append(atom_no)
    return part.coarsen(list(groups.values()))


def _random_unions(rng, part: Partition, count: int) -> list[Event]:
    out = []
    for _ in range(count):
        pick = rng.random(len(part.atoms)) < 0.5
        members = frozenset().union(*(a for a, p in zip(part.atoms, pick) if p))
        out.append(Event(members))
    return out


def verify_ce_properties(space: SampleSpace, rvs: Mapping[str, RandomVariable] | None = None,
                         partitions: Mapping[str, Partition] | None = None, seed: int = 0,
                         tol: float = EXACT_TOL) -> list[CheckResult]:
    """Evaluate both sides of every conditional-expectation property.

    Recognised input names: ``X``, ``X1``, ``X2`` (integrands), ``Y``, ``Z``,
    ``W`` (conditioning variables), partitions ``B`` and ``A`` with ``A``
    coarser than ``B``.  Missing inputs are generated from ``seed``.
    """
    rng = np.random.default_rng(seed)
    rvs = dict(rvs or {})
    partitions = dict(partitions or {})
    n = space.size
    for name in ("X", "X1", "X2"):
        rvs.setdefault(name, RandomVariable(rng.uniform(-2, 2, size=n), name))
    for name in ("Y", "Z", "W"):
        rvs.setdefault(name, _discrete_rv(rng, n, name))
    for rv in rvs.values():
        rv.check(space)
    if "B" not in partitions:
        partitions["B"] = random_partition(rng, n)
    B = partitions["B"]
    B.check(space)
    A = partitions.get("A") or _random_coarsening(rng, B)
    if not is_refinement(A, B):
        raise InvalidFiltration("partition A must be coarser than B")

    X, X1, X2 = rvs["X"], rvs["X1"], rvs["X2"]
    Y, Z, W = rvs["Y"], rvs["Z"], rvs["W"]
    gX = X.apply(g_square, "g(X)")
    hY = Y.apply(h_affine, "h(Y)")
    rows: list[CheckResult] = []

    def add(name, lhs, rhs, ref):
        rows.append(_row(name, lhs, rhs, ref, tol))

    def ce(v, *cond):
        return cond_expectation_given_rv(space, v, *cond)

    def ceb(v, part):
        return cond_expectation_given_partition(space, v, part)

    # conditioning on random variables
    pos = ce(gX, Y).values
    rows.append(CheckResult("positivity given Y", float(pos.min()), 0.0,
                            float(max(0.0, -pos.min())), bool(pos.min() >= -tol),
                            "g >= 0 implies E[g(X)|Y] >= 0"))
    a1, a2 = 2.0, -1.0
    g1X1, g2X2 = X1.apply(g_square, "g1(X1)"), X2.apply(g_cos, "g2(X2)")
    add("linearity given Y", ce(g1X1 * a1 + g2X2 * a2, Y).values,
        a1 * ce(g1X1, Y).values + a2 * ce(g2X2, Y).values,
        "E[a1 g1(X1) + a2 g2(X2)|Y] = a1 E[g1(X1)|Y] + a2 E[g2(X2)|Y]")
    add("<E[g(X)|Y] h(Y)> = <g(X) h(Y)>", expectation(space, ce(gX, Y) * hY),
        expectation(space, gX * hY), "<(Omega|g(X)|Y) h(Y)> = <g(X) h(Y)>")
    add("total expectation given Y", expectation(space, ce(gX, Y)), expectation(space, gX),
        "<P(Omega|g(X)|Y)> = <g(X)>")
    add("total expectation given Y, Z", expectation(space, ce(gX, Y, Z)), expectation(space, gX),
        "<P(Omega|g(X)|Y1,...,Yn)> = <g(X)>")
    add("take out what is known", ce(gX * hY, Y).values, (hY * ce(gX, Y)).values,
        "P(Omega|g(X) h(Y)|Y) = h(Y) P(Omega|g(X)|Y)")
    add("known function of Y", ce(hY, Y).values, hY.values, "P(Omega|h(Y)|Y) = h(Y)")
    hYZ = Y * Z + Z.apply(np.exp)
    add("known function of Y, Z", ce(hYZ, Y, Z).values, hYZ.values,
        "P(Omega|h(Y1,...,Yn)|Y1,...,Yn) = h(Y1,...,Yn)")
    add("coarse inside fine", ce(ce(gX, Z), Y, Z).values, ce(gX, Z).values,
        "P(Omega|[P(Omega|g(X)|Z)]|Y,Z) = P(Omega|g(X)|Z)")
    add("tower given Z", ce(ce(gX, Y, Z), Z).values, ce(gX, Z).values,
        "P(Omega|[P(Omega|g(X)|Y,Z)]|Z) = P(Omega|g(X)|Z)")
    add("tower over Y1..Yn+1", ce(ce(gX, Y, Z, W), Y, Z).values, ce(gX, Y, Z).values,
        "P(Omega|[P(Omega|g(X)|Y1..Yn+1)]|Y1..Yn) = P(Omega|g(X)|Y1..Yn)")

    # independence: embed the space next to a seeded three-outcome factor
    other = random_space(rng, 3, "v")
    prod, emb = product_space(space, other)
    Xp = emb.lift_rv(gX, 1)
    Yp = emb.lift_rv(RandomVariable(np.array([0.0, 1.0, 2.0]), "Y"), 2)
    add("independent conditioning given Y", cond_expectation_given_rv(prod, Xp, Yp).values,
        np.full(prod.size, expectation(space, gX)), "P(Omega|g(X)|Y) = <g(X)> for independent X, Y")
    Bp = emb.lift_partition(Partition.finest(3), 2)
    add("independent sigma-field", cond_expectation_given_partition(prod, Xp, Bp).values,
        np.full(prod.size, expectation(space, gX)), "P(Omega|X|B) = <X> for X independent of B")

    # conditioning on sigma-fields
    zB = ceb(X, B)
    for k, atom in enumerate(B.atoms):
        ev = Event(atom)
        add(f"orthogonality on atom {k}", expectation(space, (X - zB) * _ind(space, ev)), 0.0,
            "P(Omega|(X - Z) I_B|Omega) = 0")
    for k, ev in enumerate(_random_unions(rng, B, 4)):
        add(f"orthogonality on union {k}", expectation(space, (X - zB) * _ind(space, ev)), 0.0,
            "P(Omega|(X - Z) I_B|Omega) = 0")
    add("linearity given B", ceb(X1 * a1 + X2 * a2, B).values,
        a1 * ceb(X1, B).values + a2 * ceb(X2, B).values,
        "P(Omega|(a1 X1 + a2 X2)|B) = a1 P(Omega|X1|B) + a2 P(Omega|X2|B)")
    posb = ceb(gX, B).values
    rows.append(CheckResult("positivity given B", float(posb.min()), 0.0,
                            float(max(0.0, -posb.min())), bool(posb.min() >= -tol),
                            "X >= 0 implies P(Omega|X|B) >= 0"))
    YB = _measurable_on(rng, B, "Y_B")
    add("take out what is known given B", ceb(X * YB, B).values, (YB * zB).values,
        "P(Omega|XY|B) = Y P(Omega|X|B)")
    add("<XY> = <Y E[X|B]>", expectation(space, X * YB), expectation(space, YB * zB),
        "<XY> = <Y P(Omega|X|B)>")
    add("measurable is fixed by B", ceb(YB, B).values, YB.values, "P(Omega|Z|B) = Z")
    add("tower property", ceb(zB, A).values, ceb(X, A).values,
        "P(Omega|[P(Omega|X|B)]|A) = P(Omega|X|A)")
    add("tower property, reversed order", ceb(ceb(X, A), B).values, ceb(X, A).values,
        "P(Omega|[P(Omega|X|A)]|B) = P(Omega|X|A)")
    add("total expectation given B", expectation(space, zB), expectation(space, X),
        "<X> = <P(Omega|X|B)>")
    add("trivial sigma-field", ceb(X, Partition.trivial(n)).values,
        np.full(n, expectation(space, X)), "P(Omega|X|Omega) = <X>")
    add("finest sigma-field", ceb(X, Partition.finest(n)).values, X.values, "P(Omega|X|B) = X")
    add("sigma(Y) agrees with conditioning on Y", ceb(gX, sigma_of_rvs(space, Y)).values,
        np.array([cond_expectation_event(space, gX, Event(a))
                  for a in sigma_of_rvs(space, Y).atoms])[sigma_of_rvs(space, Y).atom_index()],
        "P(Omega|X|Y) = P(Omega|X|sigma(Y))")
    return rows


def _ind(space: SampleSpace, ev: Event) -> RandomVariable:
    return RandomVariable(space.mask(ev).astype(float), "I")


def all_pass(rows) -> bool:
    return all(r.passed for r in rows)
