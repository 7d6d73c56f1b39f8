from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pbn.dims import (
    DIMENSIONLESS,
    LENGTH,
    MASS,
    TIME,
    DimDeclaration,
    Dimension,
    check_equation,
    check_formula,
    dim_of,
    formula_dim,
    reference_report,
)
from pbn.errors import DimensionMismatch, PBNError, UndeclaredAxis

DECL = DimDeclaration.from_json({
    "x": {"L": 1}, "y": {"L": 1}, "t": {"T": 1}, "k": {},
    "p": {"M": 1, "L": 1, "T": -1},
    "mu": {"L": 1, "T": -1}, "sigma": {"L": 1, "T": {"num": -1, "den": 2}},
    "W_s": {"T": {"num": 1, "den": 2}},
})

fractions = st.fractions(min_value=-4, max_value=4, max_denominator=6)
dimensions = st.builds(Dimension, fractions, fractions, fractions)


def test_density_of_position():
    assert dim_of("density", "x", DECL) == Dimension(L=-1)


def test_delta_on_momentum():
    assert dim_of("delta", "p", DECL) == Dimension(L=-1, T=1, M=-1)
    assert str(dim_of("delta", "p", DECL)) == "M^-1 L^-1 T"


def test_discrete_mass_and_kets():
    assert dim_of("mass", "k", DECL).dimensionless
    assert dim_of("ket", "k", DECL).dimensionless
    assert dim_of("prob", ["x", "y"], DECL) == DIMENSIONLESS


def test_ket_halves_are_exact():
    d = dim_of("ket", "x", DECL)
    assert d.L == Fraction(-1, 2)
    assert isinstance(d.L, Fraction)


def test_undeclared_axis():
    with pytest.raises(UndeclaredAxis):
        dim_of("ket", "z", DECL)
    with pytest.raises(UndeclaredAxis):
        formula_dim("q*t", DECL)


def test_delta_needs_one_axis():
    with pytest.raises(PBNError):
        dim_of("delta", ["x", "y"], DECL)


@pytest.mark.parametrize("axes", [["x"], ["x", "y"], ["x", "t", "p"], ["k"]])
def test_system_bracket_dimensionless(axes):
    assert (dim_of("sysbra", axes, DECL) * dim_of("sysket", axes, DECL)).dimensionless


def test_brownian_path_consistent():
    res = check_formula("x", "mu*t + sigma*W_s", DECL)
    assert res.passed
    assert res.lhs_dim == LENGTH


def test_joint_density_factorizes():
    res = check_formula("density(x, y)", "density(x)*density(y)", DECL)
    assert res.passed and res.lhs_dim == Dimension(L=-2)


def test_unit_ket_counterexample():
    res = check_formula("1", "ket(x)", DECL)
    assert not res.passed
    assert res.difference() == Dimension(L=Fraction(1, 2))
    assert "dL = 1/2" in res.message


def test_sum_of_unlike_terms_reported():
    res = check_formula("x + t", "x", DECL)
    assert not res.passed and "cannot add" in res.message
    with pytest.raises(DimensionMismatch):
        formula_dim("exp(x)", DECL)
    assert formula_dim("exp(x/x)", DECL) == DIMENSIONLESS


def test_rational_exponent_syntax():
    assert formula_dim("t^1/2", DECL) == Dimension(T=Fraction(1, 2))
    assert formula_dim("t^-1/2", DECL) == Dimension(T=Fraction(-1, 2))
    assert formula_dim("t^(1/2)", DECL) == formula_dim("sqrt(t)", DECL)
    assert formula_dim("t^2/t", DECL) == TIME
    with pytest.raises(PBNError):
        formula_dim("t^x", DECL)


def test_check_equation_form():
    assert check_equation("sigma^2*t == x^2", DECL).passed
    with pytest.raises(PBNError):
        check_equation("x = x", DECL)


def test_declaration_json_roundtrip():
    d = Dimension(L=Fraction(1, 2), T=-1, M=2)
    assert Dimension.from_mapping(d.to_json()) == d
    assert DimDeclaration.from_json({"a": d.to_json()})["a"] == d


def test_reference_catalog():
    for name, expected, res in reference_report():
        assert res.passed == expected, name


@given(dimensions, dimensions, dimensions)
def test_group_laws(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * b == b * a
    assert (a * a.inverse()).dimensionless
    assert a / b == a * b.inverse()
    assert (a * b) ** Fraction(1, 2) == (a ** Fraction(1, 2)) * (b ** Fraction(1, 2))


def test_constants():
    assert LENGTH * TIME.inverse() == Dimension(L=1, T=-1)
    assert MASS ** 0 == DIMENSIONLESS
