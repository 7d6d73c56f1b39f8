import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbn.chain import (
    TERMINALS,
    DoobMG,
    EigenMG,
    FunctionProcess,
    IIDIncrements,
    MarkovChainModel,
    PathTree,
    RandomWalk,
    chapman_kolmogorov_check,
    classify,
    inverse_iteration,
    make_martingale,
    naive_power,
    power_by_squaring,
    solve_harmonic,
    verify_differences,
    verify_eigenpair,
    verify_martingale_exact,
)
from pbn.errors import (
    BoundExceeded,
    InvalidChain,
    NonZeroMeanIncrement,
    NotAnEigenpair,
    TreeTooLarge,
    ZeroLambda,
    ZeroVector,
)

P2 = [[0.9, 0.1], [0.2, 0.8]]
FAIR = IIDIncrements([1.0, -1.0], [0.5, 0.5])


@pytest.fixture
def two_state():
    return MarkovChainModel(("a", "b"), P2, [0.5, 0.5])


@pytest.fixture
def ruin():
    P = np.zeros((5, 5))
    P[0, 0] = P[4, 4] = 1.0
    for i in (1, 2, 3):
        P[i, i - 1] = P[i, i + 1] = 0.5
    return MarkovChainModel(tuple(range(5)), P, [0, 0, 1, 0, 0])


def _random_chain(rng, n):
    P = rng.random((n, n)) ** 3
    P /= P.sum(axis=1, keepdims=True)
    return MarkovChainModel(tuple(range(n)), P, np.full(n, 1 / n))


def test_chain_validation():
    with pytest.raises(InvalidChain):
        MarkovChainModel(("a", "b"), [[0.9, 0.2], [0.2, 0.8]], [0.5, 0.5])
    with pytest.raises(InvalidChain):
        MarkovChainModel(("a", "b"), [[1.1, -0.1], [0.2, 0.8]], [0.5, 0.5])
    with pytest.raises(InvalidChain):
        MarkovChainModel(("a", "b"), P2, [0.7, 0.7])
    with pytest.raises(InvalidChain):
        MarkovChainModel(("a", "b", "c"), P2, [0.5, 0.5])


def test_two_step_matrix(two_state):
    # oracle: hand multiplication
    expected = np.array([[0.9 * 0.9 + 0.1 * 0.2, 0.9 * 0.1 + 0.1 * 0.8],
                         [0.2 * 0.9 + 0.8 * 0.2, 0.2 * 0.1 + 0.8 * 0.8]])
    np.testing.assert_allclose(power_by_squaring(two_state.P, 2), expected, atol=1e-15)
    np.testing.assert_allclose(expected, [[0.83, 0.17], [0.34, 0.66]], atol=1e-15)
    assert chapman_kolmogorov_check(two_state, 1, 1) <= 1e-15


def test_identity_chain():
    chain = MarkovChainModel((0, 1, 2), np.eye(3), [1, 0, 0])
    for m in range(4):
        for n in range(4):
            assert chapman_kolmogorov_check(chain, m, n) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.integers(0, 5), st.integers(0, 5), st.integers(0, 2**32 - 1))
def test_chapman_kolmogorov_random(n, m, k, seed):
    chain = _random_chain(np.random.default_rng(seed), n)
    assert chapman_kolmogorov_check(chain, m, k) <= 1e-12
    np.testing.assert_allclose(naive_power(chain.P, m + k), power_by_squaring(chain.P, m + k),
                               atol=1e-12)


def test_harmonic_functions(two_state, ruin):
    basis = solve_harmonic(two_state)
    assert len(basis) == 1
    np.testing.assert_allclose(basis[0], 1.0)
    rb = solve_harmonic(ruin)
    assert len(rb) == 2
    phi = np.arange(5) / 4
    np.testing.assert_allclose(ruin.P @ phi, phi, atol=1e-15)
    # i/4 lies in the span of the computed basis
    B = np.column_stack(rb)
    coef, *_ = np.linalg.lstsq(B, phi, rcond=None)
    np.testing.assert_allclose(B @ coef, phi, atol=1e-12)


def test_eigenpairs(two_state):
    assert verify_eigenpair(two_state, 0.7, [1, -2]) <= 1e-15
    assert verify_eigenpair(two_state, 1.0, [1, 1]) == 0.0
    # (P - 0.5) phi = 0.2 phi, normalized by ||phi|| = 2
    assert verify_eigenpair(two_state, 0.5, [1, -2]) == pytest.approx(0.2, abs=1e-12)
    with pytest.raises(ZeroVector):
        verify_eigenpair(two_state, 0.7, [0, 0])
    lam, v = inverse_iteration(two_state, 0.69)
    assert lam == pytest.approx(0.7, abs=1e-10)
    assert verify_eigenpair(two_state, lam, v) <= 1e-10


def test_eigen_martingale_values(two_state):
    y = EigenMG(two_state, 0.7, [1, -2])
    assert y.value((1, 0, 1)) == pytest.approx(0.7**-2 * -2, rel=1e-14)
    with pytest.raises(NotAnEigenpair):
        EigenMG(two_state, 0.65, [1, -2])
    with pytest.raises(ZeroLambda):
        EigenMG(two_state, 0.0, [1, -2])


def test_eigen_martingale_exact(two_state):
    rep = verify_martingale_exact(EigenMG(two_state, 0.7, [1, -2]), 5)
    assert rep.classification == "martingale"
    assert rep.max_residual <= 1e-12
    assert rep.passed
    bad = verify_martingale_exact(EigenMG(two_state, 0.65, [1, -2], unchecked=True), 5)
    assert bad.classification != "martingale"


def test_wald(two_state):
    assert FAIR.mgf(math.log(2)) == pytest.approx(1.25, abs=1e-15)
    w = make_martingale("wald", FAIR, lam=math.log(2))
    assert w.value((0.0, 1.0, 1.0, -1.0)) == pytest.approx(2.0 / 1.25**3, rel=1e-14)
    rep = verify_martingale_exact(w, 8)
    assert rep.classification == "martingale"
    assert max(abs(m - 1.0) for m in rep.means) <= 1e-10


def test_random_walks():
    assert verify_martingale_exact(RandomWalk(FAIR), 6).max_residual == 0.0
    with pytest.raises(NonZeroMeanIncrement):
        RandomWalk(IIDIncrements([1.0, -1.0], [0.6, 0.4]))
    drift = RandomWalk(IIDIncrements([1.1, -0.9], [0.5, 0.5]), unchecked=True)
    rep = verify_martingale_exact(drift, 6)
    assert rep.classification == "submartingale"
    assert all(abs(g - 0.1) <= 1e-12 for _, g in rep.gaps)


def test_doob_examples():
    doob = DoobMG(FAIR, TERMINALS["sum"], 4)
    for k in range(5):
        for prefix, _ in PathTree.build(FAIR, k).levels[k]:
            assert doob.value(prefix) == math.fsum(prefix[1:])
    const = DoobMG(FAIR, lambda prefix: 3.0, 4)
    assert {const.value(p) for p, _ in PathTree.build(FAIR, 2).levels[2]} == {3.0}
    pos = IIDIncrements([0.5, 1.5], [0.5, 0.5])
    prod = DoobMG(pos, TERMINALS["product"], 4)
    for prefix, _ in PathTree.build(pos, 3).levels[3]:
        assert prod.value(prefix) == pytest.approx(math.prod(prefix[1:]), rel=1e-14)
    rep = verify_martingale_exact(make_martingale("doob", FAIR, terminal="max_partial_sum",
                                                  horizon=6), 6)
    assert rep.classification == "martingale" and rep.max_residual <= 1e-12


def test_transform_bounds():
    t = make_martingale("transform", FAIR, rule="double_after_loss", stake=1.0, bound=1024)
    assert t.stake((0.0, -1.0, -1.0)) == 4.0
    assert t.value((0.0, -1.0, -1.0, 1.0)) == 1.0
    assert verify_martingale_exact(t, 6).classification == "martingale"
    tight = make_martingale("transform", FAIR, rule="double_after_loss", stake=1.0, bound=4)
    with pytest.raises(BoundExceeded):
        verify_martingale_exact(tight, 6)


def test_tree_cap():
    with pytest.raises(TreeTooLarge):
        PathTree.build(FAIR, 30)
    tree = PathTree.build(FAIR, 5)
    for k in range(6):
        assert tree.level_mass(k) == pytest.approx(1.0, abs=1e-10)


def test_classify():
    assert classify([0.0, 1e-13], 1e-10) == "martingale"
    assert classify([0.1, 0.0], 1e-10) == "submartingale"
    assert classify([-0.1, 0.0], 1e-10) == "supermartingale"
    assert classify([-0.1, 0.1], 1e-10) == "neither"


def _corpus(two_state, ruin):
    drift = IIDIncrements([1.1, -0.9], [0.5, 0.5])
    return [
        EigenMG(two_state, 0.7, [1, -2]),
        EigenMG(two_state, 0.65, [1, -2], unchecked=True),
        make_martingale("harmonic", ruin, phi=np.arange(5) / 4),
        RandomWalk(FAIR),
        RandomWalk(drift, unchecked=True),
        make_martingale("wald", FAIR, lam=math.log(2)),
        make_martingale("wald", drift, lam=0.3),
        make_martingale("doob", FAIR, terminal="sum", horizon=5),
        make_martingale("transform", FAIR, rule="sign_of_last", stake=2.0, bound=2.0),
        FunctionProcess(FAIR, lambda p: math.fsum(p[1:]) ** 2),
        FunctionProcess(FAIR, lambda p: math.fsum(p[1:]) ** 2 - (len(p) - 1)),
    ]


def test_difference_characterization(two_state, ruin):
    for proc in _corpus(two_state, ruin):
        direct = verify_martingale_exact(proc, 5)
        diffs = verify_differences(proc, 5)
        assert (direct.classification == "martingale") == (diffs.classification == "martingale")
        assert direct.classification == diffs.classification
        for (p1, g1), (p2, g2) in zip(direct.gaps, diffs.gaps):
            assert p1 == p2 and abs(g1 - g2) <= 1e-12


def test_mean_invariance_for_martingales(two_state, ruin):
    for proc in _corpus(two_state, ruin):
        rep = verify_martingale_exact(proc, 5)
        if rep.classification == "martingale":
            assert rep.mean_residual <= 1e-10


def test_report_dict(two_state):
    d = verify_martingale_exact(EigenMG(two_state, 0.7, [1, -2]), 3).to_dict()
    assert d["pass"] is True and d["horizon"] == 3 and len(d["means"]) == 4
