"""JSON model files and evaluation of parsed expressions against them."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import numpy as np

from pbn import chain as chainmod
from pbn import lang
from pbn.bracket import (
    BracketValue,
    FunctionOf,
    Identity,
    Indicator,
    Observable,
    as_operator,
    characteristic_function,
    cond_expectation_given_rv,
    eval_bracket,
)
from pbn.dims import DIMENSIONLESS, DimDeclaration, Dimension
from pbn.errors import (
    DimensionMismatch,
    InvalidPartition,
    IoError,
    PBNError,
    SchemaError,
    TypeMismatch,
    UnboundName,
)
from pbn.sim import TimeGrid
from pbn.space import (
    Event,
    Partition,
    RandomVariable,
    SampleSpace,
    build_space,
)

_NUM = {"type": "number"}
_RATIONAL = {"oneOf": [
    {"type": "integer"},
    {"type": "object", "required": ["num"], "additionalProperties": False,
     "properties": {"num": {"type": "integer"}, "den": {"type": "integer", "minimum": 1}}},
]}
_DIST = {"type": "object", "required": ["values", "probs"],
         "properties": {"values": {"type": "array", "items": _NUM},
                        "probs": {"type": "array", "items": _NUM}}}

MODEL_SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "space": {
            "type": "object",
            "required": ["labels", "weights"],
            "additionalProperties": False,
            "properties": {
                "labels": {"type": "array", "items": {"type": ["string", "number"]}},
                "weights": {"type": "array", "items": _NUM},
                "bin_widths": {"type": "array", "items": _NUM},
                "normalize": {"type": "boolean"},
            },
        },
        "events": {"type": "object", "additionalProperties": {
            "type": "array", "items": {"type": "integer"}}},
        "rvs": {"type": "object", "additionalProperties": {"type": "array", "items": _NUM}},
        "partitions": {"type": "object", "additionalProperties": {
            "type": "array", "items": {"type": "array", "items": {"type": "integer"}}}},
        "dims": {"type": "object", "additionalProperties": {
            "type": "object", "propertyNames": {"enum": ["L", "T", "M"]},
            "additionalProperties": _RATIONAL}},
        "chains": {"type": "object", "additionalProperties": {
            "type": "object",
            "required": ["states", "P", "initial"],
            "properties": {
                "states": {"type": "array"},
                "P": {"type": "array", "items": {"type": "array", "items": _NUM}},
                "initial": {"type": "array", "items": _NUM},
                "values": {"type": "array", "items": _NUM},
                "horizon": {"type": "integer", "minimum": 0},
            },
        }},
        "processes": {"type": "object", "additionalProperties": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["poisson", "brownian", "harmonic", "eigen", "doob", "wald",
                                  "random_walk", "transform"]},
                "lambda": _NUM, "mu": _NUM, "sigma": _NUM,
                "grid": {"type": "array", "items": _NUM},
                "transform": {"enum": ["none", "compensate", "quadratic"]},
                "chain": {"type": "string"},
                "phi": {"type": "array", "items": _NUM},
                "increments": _DIST,
                "terminal": {"type": "string"},
                "horizon": {"type": "integer", "minimum": 0},
                "rule": {"type": "string"},
                "stake": _NUM,
                "bound": _NUM,
                "unchecked": {"type": "boolean"},
            },
        }},
    },
    "required": [],
}

FUNCTIONS = {
    "id": lambda v: v,
    "square": lambda v: v * v,
    "exp": np.exp,
    "abs": np.abs,
}


def _dim_of_function(fn: str, d: Dimension) -> Dimension:
    if fn == "square":
        return d ** 2
    if fn == "exp":
        if not d.dimensionless:
            raise DimensionMismatch(f"exp of a quantity with dimension {d}")
        return DIMENSIONLESS
    return d


@dataclass(frozen=True, eq=False)
class Model:
    space: SampleSpace | None
    events: Mapping[str, Event] = field(default_factory=dict)
    rvs: Mapping[str, RandomVariable] = field(default_factory=dict)
    partitions: Mapping[str, Partition] = field(default_factory=dict)
    dims: DimDeclaration = field(default_factory=DimDeclaration)
    chains: Mapping[str, chainmod.MarkovChainModel] = field(default_factory=dict)
    horizons: Mapping[str, int] = field(default_factory=dict)
    processes: Mapping[str, dict] = field(default_factory=dict)
    digest: str = ""
    source: str = ""
    cache: dict = field(default_factory=dict, repr=False)

    def path_space(self, name: str) -> tuple[SampleSpace, dict[float, RandomVariable]]:
        """Outcomes are the state paths of a chain up to its declared horizon."""
        return _path_space(self, name)


def _path_space(model: Model, name: str):
    if name in model.cache:
        return model.cache[name]
    ch = model.chains[name]
    horizon = model.horizons.get(name)
    if horizon is None:
        raise SchemaError("time-indexed references need a 'horizon'", f"$.chains.{name}")
    tree = chainmod.PathTree.build(ch, horizon)
    leaves = tree.levels[horizon]
    labels = [">".join(str(ch.states[i]) for i in prefix) for prefix, _ in leaves]
    space = build_space(labels, [p for _, p in leaves], normalize=True)
    vals = ch.state_values()
    rvs = {float(t): RandomVariable(np.array([vals[prefix[t]] for prefix, _ in leaves]),
                                    f"{name}@{t}") for t in range(horizon + 1)}
    model.cache[name] = (space, rvs)
    return space, rvs


def _wrap(path: str, exc: PBNError) -> PBNError:
    err = type(exc)(f"{path}: {exc}")
    return err


def model_from_dict(obj: Mapping[str, Any], source: str = "<dict>", digest: str = "") -> Model:
    """Validate ``obj`` against MODEL_SCHEMA and build the model objects."""
    validator = jsonschema.Draft7Validator(MODEL_SCHEMA)
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaError(err.message, err.json_path)

    space = None
    if "space" in obj:
        sp = obj["space"]
        try:
            space = build_space(sp["labels"], sp["weights"], sp.get("bin_widths"),
                                normalize=sp.get("normalize", False))
        except PBNError as exc:
            raise _wrap("$.space", exc) from None

    def need_space(section):
        if space is None:
            raise SchemaError(f"section '{section}' requires a 'space'", f"$.{section}")
        return space

    events = {}
    for name, idx in obj.get("events", {}).items():
        s = need_space("events")
        try:
            events[name] = s.event(idx)
        except PBNError as exc:
            raise _wrap(f"$.events.{name}", exc) from None
    rvs = {}
    for name, vals in obj.get("rvs", {}).items():
        s = need_space("rvs")
        try:
            rvs[name] = s.rv(vals, name)
        except PBNError as exc:
            raise _wrap(f"$.rvs.{name}", exc) from None
    clash = set(events) & set(rvs)
    if clash:
        raise SchemaError(f"names used for both events and random variables: {sorted(clash)}")
    partitions = {}
    for name, atoms in obj.get("partitions", {}).items():
        s = need_space("partitions")
        try:
            partitions[name] = Partition(tuple(atoms), s.size)
        except InvalidPartition as exc:
            raise SchemaError(f"Partition invariant violated: {exc}", f"$.partitions.{name}") from None
    try:
        dims = DimDeclaration.from_json(obj.get("dims", {}))
    except PBNError as exc:
        raise _wrap("$.dims", exc) from None
    chains, horizons = {}, {}
    for name, c in obj.get("chains", {}).items():
        try:
            chains[name] = chainmod.MarkovChainModel(tuple(c["states"]), c["P"], c["initial"],
                                                     c.get("values"))
        except PBNError as exc:
            raise _wrap(f"$.chains.{name}", exc) from None
        if "horizon" in c:
            horizons[name] = int(c["horizon"])
    processes = dict(obj.get("processes", {}))
    for name, p in processes.items():
        if p.get("chain") is not None and p["chain"] not in chains:
            raise SchemaError(f"unknown chain {p['chain']!r}", f"$.processes.{name}.chain")
    return Model(space, events, rvs, partitions, dims, chains, horizons, processes, digest, source)


def load_model(path) -> Model:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read model {path}: {exc.strerror}") from None
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    return model_from_dict(obj, str(path), hashlib.sha256(raw).hexdigest())


# ---------------------------------------------------------------------------
# building processes named in the model


def build_discrete_process(model: Model, name: str) -> chainmod.Process:
    spec = _process_spec(model, name)
    kind = spec["kind"]
    if kind in ("poisson", "brownian"):
        raise TypeMismatch(f"process {name!r} is continuous-time; use simulate")
    unchecked = spec.get("unchecked", False)
    if "chain" in spec:
        underlying = model.chains[spec["chain"]]
    elif "increments" in spec:
        inc = spec["increments"]
        underlying = chainmod.IIDIncrements(inc["values"], inc["probs"])
    else:
        raise SchemaError("process needs 'chain' or 'increments'", f"$.processes.{name}")
    params: dict = {"unchecked": unchecked}
    if kind in ("harmonic", "eigen"):
        params["phi"] = spec["phi"]
        params["lam"] = spec.get("lambda", 1.0)
    elif kind == "wald":
        params["lam"] = spec["lambda"]
    elif kind == "doob":
        params["terminal"] = spec.get("terminal", "sum")
        params["horizon"] = spec["horizon"]
    elif kind == "transform":
        params.update(rule=spec.get("rule", "constant"), stake=spec.get("stake", 1.0),
                      bound=spec["bound"])
    if kind == "harmonic":
        params.pop("lam")
    return chainmod.make_martingale(kind, underlying, **params)


def continuous_spec(model: Model, name: str) -> dict:
    spec = dict(_process_spec(model, name))
    if spec["kind"] not in ("poisson", "brownian"):
        raise TypeMismatch(f"process {name!r} is discrete-time; use check martingale")
    grid = spec.get("grid") or list(np.linspace(0.0, 1.0, 11))
    spec["grid"] = TimeGrid(grid)
    return spec


def _process_spec(model: Model, name: str) -> dict:
    try:
        return model.processes[name]
    except KeyError:
        raise UnboundName(f"no process named {name!r}") from None


# ---------------------------------------------------------------------------
# binding and evaluation


def _scope(expr, model: Model):
    """Pick the space: the model space, or one chain's path space for X@t refs."""
    timed = {n.name for n in lang.walk(expr) if isinstance(n, lang.RvRef) and n.time is not None}
    plain = [n for n in lang.walk(expr) if isinstance(n, lang.RvRef) and n.time is None]
    if not timed:
        if model.space is None:
            raise UnboundName("model has no sample space")
        return model.space, None
    if len(timed) > 1:
        raise TypeMismatch(f"time-indexed references to several chains: {sorted(timed)}")
    (name,) = timed
    if name not in model.chains:
        raise UnboundName(f"time-indexed reference to unknown chain {name!r}")
    if plain:
        raise TypeMismatch("cannot mix time-indexed and plain random variables")
    return _path_space(model, name)[0], name


class _Binder:
    def __init__(self, model: Model, space: SampleSpace, chain: str | None):
        self.model = model
        self.space = space
        self.chain = chain

    def rv(self, ref: lang.RvRef) -> RandomVariable:
        if ref.time is not None:
            rvs = _path_space(self.model, ref.name)[1]
            if ref.time not in rvs:
                raise UnboundName(f"{ref.name}@{ref.time:g} is beyond the chain horizon")
            return rvs[ref.time]
        if ref.name in self.model.rvs:
            return self.model.rvs[ref.name]
        if ref.name in self.model.events:
            raise TypeMismatch(f"{ref.name!r} is an event, not a random variable")
        raise UnboundName(f"unbound random variable {ref.name!r}")

    def rv_dim(self, ref: lang.RvRef) -> Dimension:
        return self.model.dims.get(ref.name, DIMENSIONLESS)

    def event(self, e) -> Event:
        if isinstance(e, lang.Omega):
            return self.space.full()
        if isinstance(e, lang.EventRef):
            if self.chain is None and e.name in self.model.events:
                return self.model.events[e.name]
            if e.name in self.model.rvs:
                raise TypeMismatch(f"{e.name!r} is a random variable, not an event")
            raise UnboundName(f"unbound event {e.name!r}")
        if isinstance(e, lang.Assign):
            vals = self.rv(e.rv).values
            return Event(frozenset(np.flatnonzero(vals == e.value).tolist()))
        if isinstance(e, lang.Inter):
            return self.event(e.left) & self.event(e.right)
        if isinstance(e, lang.Union_):
            return self.event(e.left) | self.event(e.right)
        if isinstance(e, lang.Compl):
            return self.event(e.inner).complement(self.space)
        raise TypeMismatch(f"{type(e).__name__} is not an event")

    def op(self, o):
        if isinstance(o, lang.Ident):
            return Identity(), DIMENSIONLESS
        if isinstance(o, lang.Ind):
            if o.event in self.model.rvs:
                raise TypeMismatch(f"indicator of random variable {o.event!r}")
            if o.event not in self.model.events:
                raise UnboundName(f"unbound event {o.event!r}")
            return Indicator(self.model.events[o.event]), DIMENSIONLESS
        if isinstance(o, lang.Func):
            if o.fn not in FUNCTIONS:
                raise UnboundName(f"unknown function {o.fn!r}; available: {sorted(FUNCTIONS)}")
            rv = self.rv(o.rv)
            return FunctionOf(rv, FUNCTIONS[o.fn], o.fn), _dim_of_function(o.fn, self.rv_dim(o.rv))
        return Observable(self.rv(o.rv)), self.rv_dim(o.rv)

    def conditioning_rvs(self, ket):
        """RVs when the ket conditions on random variables, else None."""
        if isinstance(ket, lang.RvList):
            return [self.rv(r) for r in ket.items]
        if isinstance(ket, lang.EventRef) and ket.name in self.model.rvs and self.chain is None:
            return [self.model.rvs[ket.name]]
        return None

    def eval(self, e):
        if isinstance(e, lang.Scalar):
            return BracketValue(e.value)
        if isinstance(e, lang.CharFn):
            return BracketValue(characteristic_function(self.space, self.rv(e.rv), e.k))
        if isinstance(e, lang.Bracket):
            ops, dim = [], DIMENSIONLESS
            for o in e.ops:
                op, d = self.op(o)
                ops.append(op)
                dim = dim * d
            bra = self.event(e.bra)
            ys = self.conditioning_rvs(e.ket)
            if ys is not None:
                factor = np.where(self.space.mask(bra), 1.0, 0.0)
                for op in ops:
                    factor = factor * as_operator(op).diagonal(self.space)
                return cond_expectation_given_rv(self.space, RandomVariable(factor, "g"), *ys)
            return eval_bracket(self.space, bra, ops, self.event(e.ket), dim)
        if isinstance(e, lang.BinOp):
            a, b = self.eval(e.left), self.eval(e.right)
            if isinstance(a, RandomVariable) or isinstance(b, RandomVariable):
                raise TypeMismatch("arithmetic on conditional-expectation random variables")
            if e.op in "+-":
                if a.dimension != b.dimension and not (_is_zero(a) or _is_zero(b)):
                    raise DimensionMismatch(f"cannot combine [{a.dimension}] and [{b.dimension}]")
                dim = a.dimension if not _is_zero(a) else b.dimension
                v = a.value + b.value if e.op == "+" else a.value - b.value
                return BracketValue(v, dim)
            if e.op == "*":
                return BracketValue(a.value * b.value, a.dimension * b.dimension)
            if b.value == 0:
                raise PBNError("division by zero")
            return BracketValue(a.value / b.value, a.dimension / b.dimension)
        raise TypeMismatch(f"cannot evaluate {type(e).__name__}")


def _is_zero(v: BracketValue) -> bool:
    return v.value == 0 and v.dimension == DIMENSIONLESS


def bind_and_eval(expr, model: Model):
    """Evaluate a parsed expression (or its text) against a model.

    Returns a BracketValue, or a RandomVariable when the ket conditions on
    random variables.
    """
    if isinstance(expr, str):
        expr = lang.parse(expr)
    space, chain = _scope(expr, model)
    return _Binder(model, space, chain).eval(expr)


def format_value(v) -> str:
    if isinstance(v, RandomVariable):
        return "[" + ", ".join(f"{x:.12g}" for x in v.values) + "]"
    val = v.value
    if isinstance(val, complex):
        text = f"{val.real:.12g}{val.imag:+.12g}j"
    else:
        text = f"{val:.12g}"
    return text if v.dimension.dimensionless else f"{text} [{v.dimension}]"


def jsonable_value(v):
    if isinstance(v, RandomVariable):
        return [float(x) for x in v.values]
    if isinstance(v.value, complex):
        return {"re": v.value.real, "im": v.value.imag}
    return float(v.value) if math.isfinite(v.value) else str(v.value)
