import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbn.bracket import cond_expectation_given_partition, expectation
from pbn.ce_properties import all_pass, verify_ce_properties
from pbn.errors import InvalidFiltration
from pbn.space import Partition, RandomVariable, random_space

TOL = 1e-12


def _by_name(rows):
    return {r.property: r for r in rows}


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 12), st.integers(0, 2**32 - 1))
def test_all_properties_hold(n, seed):
    rng = np.random.default_rng(seed)
    rows = verify_ce_properties(random_space(rng, n), seed=seed)
    bad = [(r.property, r.residual) for r in rows if not r.passed]
    assert not bad
    assert max(r.residual for r in rows) <= TOL


def test_linearity_with_given_coefficients():
    rng = np.random.default_rng(3)
    s = random_space(rng, 6)
    rows = _by_name(verify_ce_properties(s, seed=3))
    assert rows["linearity given B"].residual <= TOL
    assert rows["linearity given Y"].residual <= TOL


def test_tower_with_trivial_outer():
    rng = np.random.default_rng(11)
    s = random_space(rng, 8)
    x = RandomVariable(rng.normal(size=8), "X")
    B = Partition.from_labels([0, 0, 1, 1, 2, 2, 3, 3])
    rows = _by_name(verify_ce_properties(s, {"X": x}, {"B": B, "A": Partition.trivial(8)}))
    assert rows["tower property"].passed
    np.testing.assert_allclose(rows["tower property"].rhs, expectation(s, x), atol=TOL)


def test_take_out_known_matches_direct():
    rng = np.random.default_rng(5)
    s = random_space(rng, 8)
    B = Partition.from_labels([0, 0, 1, 1, 1, 2, 2, 3])
    x = RandomVariable(rng.normal(size=8), "X")
    y = RandomVariable(np.array([2.0, 2.0, -1.0, -1.0, -1.0, 0.5, 0.5, 3.0]), "Y")
    lhs = cond_expectation_given_partition(s, x * y, B).values
    rhs = y.values * cond_expectation_given_partition(s, x, B).values
    np.testing.assert_allclose(lhs, rhs, atol=TOL)


def test_take_out_fails_for_unmeasurable_factor():
    # negative control: Y varies inside an atom, so it cannot be pulled out
    rng = np.random.default_rng(6)
    s = random_space(rng, 4)
    B = Partition.trivial(4)
    x = RandomVariable(np.array([1.0, 2.0, 3.0, 4.0]), "X")
    y = RandomVariable(np.array([1.0, 0.0, 0.0, 1.0]), "Y")
    lhs = cond_expectation_given_partition(s, x * y, B).values
    rhs = y.values * cond_expectation_given_partition(s, x, B).values
    assert np.max(np.abs(lhs - rhs)) > 0.1


def test_non_nested_partitions_rejected():
    s = random_space(np.random.default_rng(1), 6)
    parts = {"B": Partition(([0, 1, 2], [3, 4, 5])), "A": Partition(([0, 3], [1, 4], [2, 5]))}
    with pytest.raises(InvalidFiltration):
        verify_ce_properties(s, partitions=parts)


def test_report_shape_and_all_pass():
    rows = verify_ce_properties(random_space(np.random.default_rng(2), 7), seed=2)
    assert all_pass(rows)
    names = {r.property for r in rows}
    for expected in ("tower property", "tower property, reversed order", "total expectation given B",
                     "independent sigma-field", "positivity given B"):
        assert expected in names
    assert all(r.paper_ref for r in rows)
