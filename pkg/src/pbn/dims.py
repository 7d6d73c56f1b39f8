"""Physical dimensions over length, time and mass with exact rational exponents.

Formulas are written in a small Python-compatible syntax and checked by
walking the ``ast`` tree::

    check_formula("X", "mu*t + sigma*W_s", decl)
    check_formula("density(x, y)", "density(x) * density(y)", decl)

Entity functions understood inside formulas:

    ket(a, ...)     base ket on the given axes      prod dim(a)^(-1/2)
    bra(a, ...)     base bra                         prod dim(a)^(-1/2)
    density(a, ...) probability density              prod dim(a)^(-1)
    sysket(a, ...)  system ket |Omega)               prod dim(a)^(-1/2)
    sysbra(a, ...)  system bra (Omega|               prod dim(a)^(+1/2)
    delta(a)        delta function on an axis        dim(a)^(-1)
    prob(...)       macro-event probability          dimensionless
    mass(...)       discrete point mass              dimensionless
"""

from __future__ import annotations

import ast
import keyword
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from pbn.errors import DimensionMismatch, PBNError, UndeclaredAxis

BASES = ("L", "T", "M")


@dataclass(frozen=True)
class Dimension:
    L: Fraction = Fraction(0)
    T: Fraction = Fraction(0)
    M: Fraction = Fraction(0)

    def __post_init__(self):
        for b in BASES:
            object.__setattr__(self, b, Fraction(getattr(self, b)))

    @classmethod
    def from_mapping(cls, exps: Mapping) -> Dimension:
        bad = set(exps) - set(BASES)
        if bad:
            raise PBNError(f"unknown base dimension(s) {sorted(bad)}; bases are {BASES}")
        return cls(**{b: _rational(v) for b, v in exps.items()})

    def exponents(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.L, self.T, self.M)

    def __mul__(self, other: Dimension) -> Dimension:
        return Dimension(self.L + other.L, self.T + other.T, self.M + other.M)

    def __truediv__(self, other: Dimension) -> Dimension:
        return Dimension(self.L - other.L, self.T - other.T, self.M - other.M)

    def __pow__(self, p) -> Dimension:
        p = Fraction(p)
        return Dimension(self.L * p, self.T * p, self.M * p)

    def inverse(self) -> Dimension:
        return self ** -1

    @property
    def dimensionless(self) -> bool:
        return not any(self.exponents())

    def __str__(self) -> str:
        if self.dimensionless:
            return "1"
        parts = []
        for b in ("M", "L", "T"):
            e = getattr(self, b)
            if e == 1:
                parts.append(b)
            elif e:
                parts.append(f"{b}^{e}")
        return " ".join(parts)

    def to_json(self) -> dict:
        out = {}
        for b in BASES:
            e = getattr(self, b)
            if e:
                out[b] = int(e) if e.denominator == 1 else {"num": e.numerator, "den": e.denominator}
        return out


DIMENSIONLESS = Dimension()
LENGTH = Dimension(L=1)
TIME = Dimension(T=1)
MASS = Dimension(M=1)


def _rational(v) -> Fraction:
    if isinstance(v, Mapping):
        return Fraction(int(v["num"]), int(v.get("den", 1)))
    if isinstance(v, float):
        return Fraction(v).limit_denominator(1000)
    return Fraction(v)


class DimDeclaration(dict):
    """Name -> Dimension for axes and parameters; discrete axes map to DIMENSIONLESS."""

    @classmethod
    def from_json(cls, obj: Mapping) -> DimDeclaration:
        return cls({name: Dimension.from_mapping(exps) for name, exps in obj.items()})

    def lookup(self, name: str) -> Dimension:
        try:
            return self[name]
        except KeyError:
            raise UndeclaredAxis(f"no dimension declared for {name!r}") from None


ENTITY_KINDS = ("ket", "bra", "density", "sysket", "sysbra", "delta", "prob", "mass")


def dim_of(kind: str, axes, decl: DimDeclaration) -> Dimension:
    """Dimension of a bracket-calculus object living on ``axes``."""
    axes = (axes,) if isinstance(axes, str) else tuple(axes)
    if kind in ("prob", "mass"):
        return DIMENSIONLESS
    if kind not in ENTITY_KINDS:
        raise PBNError(f"unknown entity kind {kind!r}")
    vol = DIMENSIONLESS
    for a in axes:
        vol = vol * decl.lookup(a)
    if kind in ("ket", "bra", "sysket"):
        return vol ** Fraction(-1, 2)
    if kind == "sysbra":
        return vol ** Fraction(1, 2)
    if kind == "density":
        return vol.inverse()
    if len(axes) != 1:
        raise PBNError("delta takes exactly one axis")
    return vol.inverse()


def _const_value(node: ast.AST) -> Fraction:
    """Exponent expressions: integer literals combined with + - * / and unary minus."""
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return _rational(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _const_value(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a, b = _const_value(node.left), _const_value(node.right)
        ops = {ast.Add: a.__add__, ast.Sub: a.__sub__, ast.Mult: a.__mul__, ast.Div: a.__truediv__}
        for op, fn in ops.items():
            if isinstance(node.op, op):
                return fn(b)
    raise PBNError(f"exponent must be a rational constant, got {ast.unparse(node)!r}")


def _dim(node: ast.AST, decl: DimDeclaration) -> Dimension:
    if isinstance(node, ast.Expression):
        return _dim(node.body, decl)
    if isinstance(node, ast.Name):
        return decl.lookup(node.id.removeprefix(_KW_PREFIX))
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return DIMENSIONLESS
    if isinstance(node, ast.UnaryOp):
        return _dim(node.operand, decl)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        fn = node.func.id
        if fn in ENTITY_KINDS:
            axes = []
            for a in node.args:
                if not isinstance(a, ast.Name):
                    raise PBNError(f"{fn}() arguments must be axis names")
                axes.append(a.id.removeprefix(_KW_PREFIX))
            return dim_of(fn, axes, decl)
        if fn in ("exp", "log", "sin", "cos"):
            for a in node.args:
                d = _dim(a, decl)
                if not d.dimensionless:
                    raise DimensionMismatch(f"{fn}() argument has dimension {d}")
            return DIMENSIONLESS
        if fn == "sqrt":
            return _dim(node.args[0], decl) ** Fraction(1, 2)
        raise PBNError(f"unknown function {fn!r} in formula")
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            return _dim(node.left, decl) ** _const_value(node.right)
        left, right = _dim(node.left, decl), _dim(node.right, decl)
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            return left / right
        if isinstance(node.op, (ast.Add, ast.Sub)):
            if left != right:
                raise DimensionMismatch(
                    f"cannot add {ast.unparse(node.left)} [{left}] and "
                    f"{ast.unparse(node.right)} [{right}]")
            return left
    raise PBNError(f"unsupported formula element {ast.unparse(node)!r}")


_KW_PREFIX = "kw__"
_KEYWORD = re.compile(r"\b(?:%s)\b" % "|".join(keyword.kwlist))
_RATIONAL_POW = re.compile(r"\^\s*(-?\s*\d+\s*/\s*\d+)")


def formula_dim(text: str, decl: DimDeclaration) -> Dimension:
    """Dimension of a product expression such as ``"sigma*t^(1/2)"``."""
    # t^1/2 means t^(1/2), not (t^1)/2
    src = _RATIONAL_POW.sub(r"**(\1)", text).replace("^", "**")
    # names such as "lambda" are Python keywords; escape them before parsing
    src = _KEYWORD.sub(lambda m: _KW_PREFIX + m.group(0), src)
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise PBNError(f"cannot parse formula {text!r}: {exc.msg}") from None
    return _dim(tree, decl)


@dataclass(frozen=True)
class FormulaCheck:
    lhs: str
    rhs: str
    lhs_dim: Dimension | None
    rhs_dim: Dimension | None
    passed: bool
    message: str

    def difference(self) -> Dimension:
        return self.lhs_dim / self.rhs_dim


def check_formula(lhs: str, rhs: str, decl: DimDeclaration) -> FormulaCheck:
    """Compare the dimensions of two formulas exactly.

    A sum of terms with different dimensions on either side is reported as a
    failure rather than raised; undeclared names still raise UndeclaredAxis.
    """
    dims = []
    for side in (lhs, rhs):
        try:
            dims.append(formula_dim(side, decl))
        except DimensionMismatch as exc:
            return FormulaCheck(lhs, rhs, None, None, False, str(exc))
    ld, rd = dims
    if ld == rd:
        return FormulaCheck(lhs, rhs, ld, rd, True, f"both sides [{ld}]")
    diff = ld / rd
    deltas = ", ".join(f"d{b} = {getattr(diff, b)}" for b in BASES if getattr(diff, b))
    return FormulaCheck(lhs, rhs, ld, rd, False, f"[{ld}] != [{rd}]: {deltas}")


def check_equation(text: str, decl: DimDeclaration) -> FormulaCheck:
    """``"lhs == rhs"`` form used by the command line."""
    if "==" not in text:
        raise PBNError(f"expected 'lhs == rhs', got {text!r}")
    lhs, rhs = text.split("==", 1)
    return check_formula(lhs.strip(), rhs.strip(), decl)


# Dimension assignments from the bracket calculus, each written as a formula
# identity under one shared declaration.  The last entry is the known
# counterexample: normalizing base kets to unity contradicts [|x)] = L^-1/2.
REFERENCE_DECL = {
    "x": {"L": 1}, "y": {"L": 1}, "t": {"T": 1}, "m": {"M": 1},
    "p": {"M": 1, "L": 1, "T": -1},
    "k": {}, "N": {},
    "lam": {"T": -1}, "mu": {"L": 1, "T": -1}, "sigma": {"L": 1, "T": {"num": -1, "den": 2}},
    "W": {"L": 1}, "W_s": {"T": {"num": 1, "den": 2}},
    "X": {"L": 1}, "Z": {"L": 1}, "M_t": {"L": 2},
}

REFERENCE_CHECKS = (
    ("position ket", "ket(x)", "x^-1/2", True),
    ("position bra", "bra(x)", "x^-1/2", True),
    ("position density", "density(x)", "1/x", True),
    ("system ket", "sysket(x)", "x^-1/2", True),
    ("system bra", "sysbra(x)", "x^1/2", True),
    ("system bracket dimensionless", "sysbra(x)*sysket(x)", "1", True),
    ("base bracket is a delta", "bra(x)*ket(x)", "delta(x)", True),
    ("completeness dx |x)(x|", "x*ket(x)*bra(x)", "1", True),
    ("momentum delta", "delta(p)", "t/(m*x)", True),
    ("discrete ket", "ket(k)", "1", True),
    ("discrete bra", "bra(k)", "1", True),
    ("discrete system ket", "sysket(k)", "1", True),
    ("discrete system bra", "sysbra(k)", "1", True),
    ("discrete mass", "mass(k)", "1", True),
    ("joint ket factorizes", "ket(x, y)", "ket(x)*ket(y)", True),
    ("joint ket", "ket(x, y)", "1/x", True),
    ("joint density factorizes", "density(x, y)", "density(x)*density(y)", True),
    ("joint density", "density(x, y)", "x^-2", True),
    ("joint system ket factorizes", "sysket(x, y)", "sysket(x)*sysket(y)", True),
    ("Poisson rate", "lam", "1/t", True),
    ("Poisson count", "N", "mass(k)", True),
    ("Poisson mean lam t", "lam*t", "N", True),
    ("Brownian density", "density(x)", "1/x", True),
    ("Brownian system ket", "sysket(x)", "x^-1/2", True),
    ("Brownian system bra", "sysbra(x)", "x^1/2", True),
    ("drift", "mu", "x/t", True),
    ("volatility", "sigma", "x/t^1/2", True),
    ("Brownian path", "X", "mu*t + sigma*W_s", True),
    ("Wiener rescaling", "W", "sigma*W_s", True),
    ("compensated path", "Z", "X - mu*t", True),
    ("quadratic martingale", "M_t", "Z^2 - sigma^2*t", True),
    ("unit-normalized base ket", "1", "ket(x)", False),
)


def reference_report() -> list[tuple[str, bool, FormulaCheck]]:
    """Evaluate every reference assignment: (name, expected, result)."""
    decl = DimDeclaration.from_json(REFERENCE_DECL)
    return [(name, expect, check_formula(lhs, rhs, decl)) for name, lhs, rhs, expect in REFERENCE_CHECKS]
