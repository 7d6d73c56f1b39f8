import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

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
from pbn.space import (
    Event,
    Filtration,
    Partition,
    build_space,
    check_independence,
    discretize,
    event_prob,
    is_refinement,
    join,
    natural_filtration,
    product_space,
    random_partition,
    random_space,
    sigma_of_rvs,
)


def test_fair_coin(coin):
    assert coin.size == 2
    assert coin.labels == ("H", "T")
    np.testing.assert_array_equal(coin.weights, [0.5, 0.5])


def test_weights_are_read_only(coin):
    with pytest.raises(ValueError):
        coin.weights[0] = 1.0


@pytest.mark.parametrize("weights, err", [
    ([0.2, 0.2], NotNormalized),
    ([1.5, -0.5], NegativeWeight),
    ([float("nan"), 1.0], NegativeWeight),
])
def test_build_space_rejects(weights, err):
    with pytest.raises(err):
        build_space(["a", "b"], weights)


def test_build_space_duplicate_and_mismatch():
    with pytest.raises(DuplicateLabel):
        build_space(["a", "a"], [0.5, 0.5])
    with pytest.raises(SpaceMismatch):
        build_space(["a", "b", "c"], [0.5, 0.5])


def test_normalize_flag():
    s = build_space(["a", "b"], [1.0, 3.0], normalize=True)
    np.testing.assert_allclose(s.weights, [0.25, 0.75])


def test_discretized_gaussian_mass():
    # oracle: Riemann sum of the unit normal density on the same grid
    dens = lambda x: np.exp(-x**2 / 2) / math.sqrt(2 * math.pi)
    space, x = discretize(dens, -5.0, 5.0, 101, normalize=True)
    assert space.size == 101
    assert math.fsum(space.weights) == pytest.approx(1.0, abs=1e-12)
    assert space.bin_widths == (0.1,)
    raw = dens(np.linspace(-5, 5, 101)) * 0.1
    assert math.fsum(raw) == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(space.weights, raw / raw.sum(), rtol=1e-12)
    assert x.values[50] == pytest.approx(0.0, abs=1e-15)


def test_event_prob_die(die):
    assert event_prob(die, die.event([1, 3, 5])) == pytest.approx(0.5, abs=1e-15)
    assert event_prob(die, die.full()) == pytest.approx(1.0, abs=1e-12)
    assert event_prob(die, die.empty()) == 0.0


def test_event_out_of_range(die):
    with pytest.raises(IndexOutOfRange):
        die.event([6])
    with pytest.raises(IndexOutOfRange):
        event_prob(die, Event.of([-1]))


def test_event_algebra(die):
    a, b = die.event([0, 1]), die.event([1, 2])
    assert (a & b).sorted() == [1]
    assert (a | b).sorted() == [0, 1, 2]
    assert a.complement(die).sorted() == [2, 3, 4, 5]
    assert die.event_of_labels(["2", "4"]).sorted() == [1, 3]


def test_rv_length_checked(die):
    with pytest.raises(SpaceMismatch):
        die.rv([1.0, 2.0])


def test_sigma_of_parity(die):
    parity = die.rv([1, 0, 1, 0, 1, 0], "Y")
    part = sigma_of_rvs(die, parity)
    assert set(part.atoms) == {frozenset({0, 2, 4}), frozenset({1, 3, 5})}


def test_sigma_injective_and_constant(die, die_x):
    assert len(sigma_of_rvs(die, die_x).atoms) == 6
    assert sigma_of_rvs(die, die.rv([2.0] * 6)).atoms == (frozenset(range(6)),)


def test_is_refinement_cases(die, die_x):
    assert is_refinement(Partition.trivial(6), Partition.finest(6))
    assert not is_refinement(Partition.finest(6), Partition.trivial(6))
    parity = sigma_of_rvs(die, die.rv([1, 0, 1, 0, 1, 0]))
    joint = sigma_of_rvs(die, die.rv([1, 0, 1, 0, 1, 0]), die_x)
    assert is_refinement(parity, joint)


@pytest.mark.parametrize("atoms, n", [
    (([0, 1], [1, 2]), 3),
    (([0], [2]), 3),
    (([0, 1, 2], []), 3),
    (([0, 5],), 2),
])
def test_invalid_partitions(atoms, n):
    with pytest.raises(InvalidPartition):
        Partition(atoms, n)


def test_filtration_must_refine():
    Filtration((Partition.trivial(4), Partition(([0, 1], [2, 3])), Partition.finest(4)))
    with pytest.raises(InvalidFiltration):
        Filtration((Partition.finest(4), Partition.trivial(4)))


def test_natural_filtration_adapted(die, die_x):
    proc = [die.rv([1, 0, 1, 0, 1, 0]), die_x]
    filt = natural_filtration(die, proc)
    assert filt.adapted(proc)
    assert not Filtration((Partition.trivial(6), Partition.finest(6))).adapted([die_x])


def test_independence_examples(die, coin):
    two, emb = product_space(coin, coin)
    a = emb.lift_event(coin.event([0]), 1)
    b = emb.lift_event(coin.event([0]), 2)
    res = check_independence(two, a, b)
    assert res.independent and res.residual == 0.0
    np.testing.assert_array_equal(two.weights, [0.25] * 4)

    dep = check_independence(die, die.event([0, 1]), die.event([1, 2]))
    assert not dep.independent
    assert dep.residual == pytest.approx(1 / 6 - 1 / 9, abs=1e-15)
    assert check_independence(die, die.full(), die.event([3])).independent


def test_product_cardinality_and_cap(coin):
    three = build_space(list("abc"), [0.2, 0.3, 0.5])
    prod, emb = product_space(coin, three)
    assert prod.size == 6
    np.testing.assert_allclose(emb.marginal(prod.weights, 1), coin.weights)
    np.testing.assert_allclose(emb.marginal(prod.weights, 2), three.weights)
    with pytest.raises(SizeOverflow):
        product_space(coin, three, cap=5)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_lifted_events_independent(n1, n2, seed):
    rng = np.random.default_rng(seed)
    s1, s2 = random_space(rng, n1, "a"), random_space(rng, n2, "b")
    prod, emb = product_space(s1, s2)
    a = emb.lift_event(s1.event(np.flatnonzero(rng.random(n1) < 0.5)), 1)
    b = emb.lift_event(s2.event(np.flatnonzero(rng.random(n2) < 0.5)), 2)
    assert check_independence(prod, a, b).residual <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_join_refines_both(n, seed):
    rng = np.random.default_rng(seed)
    p, q = random_partition(rng, n), random_partition(rng, n)
    j = join(p, q)
    assert is_refinement(p, j) and is_refinement(q, j)
    assert sum(len(a) for a in j.atoms) == n


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_random_space_is_normalized(n, seed):
    s = random_space(np.random.default_rng(seed), n)
    assert abs(math.fsum(s.weights) - 1.0) <= 1e-12
    assert np.all(s.weights > 0)
