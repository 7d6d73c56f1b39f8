"""``pbn`` command line: eval, check, simulate, dims.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage/model/parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from pbn import chain as chainmod
from pbn import sim
from pbn.bracket import CheckResult, indicator_identities
from pbn.ce_properties import verify_ce_properties
from pbn.dims import check_equation
from pbn.errors import PBNError, PBNSyntaxError
from pbn.model import (
    Model,
    bind_and_eval,
    build_discrete_process,
    continuous_spec,
    format_value,
    jsonable_value,
    load_model,
)
from pbn.space import random_space

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


@dataclass
class RunReport:
    command: str
    model_hash: str | None
    seed: int | None
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_dict(self) -> dict:
        return {"command": self.command, "model_hash": self.model_hash, "seed": self.seed,
                "checks": self.checks, "pass": self.passed}


class UsageError(PBNError):
    pass


def _load(args) -> Model | None:
    return load_model(args.model) if getattr(args, "model", None) else None


def _require(model: Model | None) -> Model:
    if model is None:
        raise UsageError("--model is required for this command")
    return model


def _emit(report: RunReport, args, out) -> int:
    if args.json:
        json.dump(report.to_dict(), out, indent=2)
        out.write("\n")
    else:
        for c in report.checks:
            status = "PASS" if c["pass"] else "FAIL"
            if "sigmas" in c:
                detail = f"residual={c['residual']:.3g} sigmas={c['sigmas']:.3g}"
            else:
                detail = f"residual={c['residual']:.3g}"
            out.write(f"{status}  {c['property']}  {detail}".rstrip() + "\n")
            if not c["pass"] and c.get("paper_ref"):
                out.write(f"      identity: {c['paper_ref']}\n")
        out.write(f"overall: {'PASS' if report.passed else 'FAIL'}\n")
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_eval(args, out) -> int:
    model = _require(_load(args))
    value = bind_and_eval(args.expr, model)
    if args.json:
        dim = getattr(value, "dimension", None)
        payload = {"command": "eval", "model_hash": model.digest, "expr": args.expr,
                   "value": jsonable_value(value), "dimension": str(dim) if dim else None}
        json.dump(payload, out, indent=2)
        out.write("\n")
    else:
        out.write(format_value(value) + "\n")
    return EXIT_PASS


def _rows(results) -> list[dict]:
    return [r.to_dict() if isinstance(r, CheckResult) else r for r in results]


def _suite_ce(args, model):
    if model is not None and model.space is not None:
        space = model.space
        rvs = dict(model.rvs)
        parts = dict(model.partitions)
    else:
        rng = np.random.default_rng(args.seed)
        space = random_space(rng, args.outcomes)
        rvs, parts = {}, {}
    rows = verify_ce_properties(space, rvs, parts, seed=args.seed, tol=args.tol)
    return _rows(rows)


def _suite_indicator(args, model):
    model = _require(model)
    names = list(model.events)
    if args.rv:
        xs = [model.rvs[args.rv]]
    else:
        xs = list(model.rvs.values())
    if not xs or not names:
        raise UsageError("indicator suite needs at least one event and one random variable")
    out = []
    pairs = [(args.event_a, args.event_b)] if args.event_a else [(a, b) for a in names for b in names]
    for a, b in pairs:
        for x in xs:
            for row in indicator_identities(model.space, x, model.events[a], model.events[b],
                                            tol=args.tol):
                d = row.to_dict()
                d["property"] = f"{d['property']} [X={x.name}, A={a}, B={b}]"
                out.append(d)
    return out


def _suite_ck(args, model):
    model = _require(model)
    names = [args.chain] if args.chain else list(model.chains)
    if not names:
        raise UsageError("model defines no chains")
    out = []
    for name in names:
        ch = model.chains[name]
        for m in range(args.m + 1):
            for n in range(args.n + 1):
                res = chainmod.chapman_kolmogorov_check(ch, m, n)
                out.append({"property": f"Chapman-Kolmogorov {name} m={m} n={n}",
                            "lhs": None, "rhs": None, "residual": res, "pass": res <= args.tol,
                            "paper_ref": "p^(m+n)_ij = sum_k p^m_ik p^n_kj"})
    return out


def _suite_martingale(args, model):
    model = _require(model)
    if not args.process:
        raise UsageError("--process is required")
    proc = build_discrete_process(model, args.process)
    rep = chainmod.verify_martingale_exact(proc, args.horizon, tol=args.tol)
    diff = chainmod.verify_differences(proc, args.horizon, tol=args.tol)
    return [
        {"property": f"martingale {args.process}", "lhs": rep.max_gap, "rhs": rep.min_gap,
         "residual": rep.max_residual, "pass": rep.classification == "martingale",
         "classification": rep.classification,
         "paper_ref": "E(Y_{n+1}|X_1..X_n) = Y_n"},
        {"property": f"mean invariance {args.process}", "lhs": rep.means[-1], "rhs": rep.means[0],
         "residual": rep.mean_residual, "pass": rep.mean_residual <= args.tol,
         "paper_ref": "<Y_n> = <Y_0>"},
        {"property": f"zero-mean differences {args.process}", "lhs": diff.max_gap,
         "rhs": 0.0, "residual": diff.max_residual, "pass": diff.classification == "martingale",
         "paper_ref": "P(Omega|D_{n+1}|F_n) = 0"},
    ]


def _dims_rows(model, checks):
    model = _require(model)
    rows = []
    for text in checks:
        fc = check_equation(text, model.dims)
        rows.append({"property": f"dims {text}",
                     "lhs": str(fc.lhs_dim) if fc.lhs_dim else None,
                     "rhs": str(fc.rhs_dim) if fc.rhs_dim else None,
                     "residual": 0.0 if fc.passed else 1.0, "pass": fc.passed,
                     "message": fc.message, "paper_ref": "dimensional consistency"})
    return rows


SUITES = {
    "ce-properties": _suite_ce,
    "indicator": _suite_indicator,
    "chapman-kolmogorov": _suite_ck,
    "martingale": _suite_martingale,
    "dims": lambda args, model: _dims_rows(model, args.check or []),
}


def cmd_check(args, out) -> int:
    model = _load(args)
    if args.suite == "dims" and not args.check:
        raise UsageError("--check 'lhs == rhs' is required for the dims suite")
    rows = SUITES[args.suite](args, model)
    report = RunReport(f"check {args.suite}", model.digest if model else None, args.seed, rows)
    return _emit(report, args, out)


def cmd_dims(args, out) -> int:
    model = _load(args)
    if not args.check:
        raise UsageError("--check 'lhs == rhs' is required")
    report = RunReport("dims", model.digest if model else None, None, _dims_rows(model, args.check))
    return _emit(report, args, out)


def _stat_row(name, rep: sim.StatReport, ref: str) -> dict:
    worst = max(rep.bins, key=lambda b: abs(b.sigmas))
    return {"property": name, "lhs": rep.drift, "rhs": 0.0,
            "residual": max(abs(b.estimate) for b in rep.bins), "stderr": rep.drift_stderr,
            "sigmas": max(abs(worst.sigmas), abs(rep.pooled_sigmas)), "pass": rep.passed,
            "drift": rep.drift, "bins": [b.to_dict() for b in rep.bins], "paper_ref": ref}


def cmd_simulate(args, out) -> int:
    model = _require(_load(args))
    if not args.process:
        raise UsageError("--process is required")
    spec = continuous_spec(model, args.process)
    grid = spec["grid"]
    if spec["kind"] == "poisson":
        ens = sim.sample_poisson(spec["lambda"], grid, args.paths, args.seed, args.workers)
    else:
        ens = sim.sample_brownian(spec.get("mu", 0.0), spec["sigma"], grid, args.paths,
                                  args.seed, args.workers)
    transform = args.transform or spec.get("transform", "none")
    if transform in ("compensate", "quadratic"):
        ens = sim.compensate(ens)
    if transform == "quadratic":
        ens = sim.quadratic_martingale(ens)
    if ens.n_paths < sim.MIN_PATHS:
        raise sim.TooFewPaths(f"{ens.n_paths} paths; at least {sim.MIN_PATHS} required")

    rows = []
    s = args.s
    t = args.t if args.t is not None else float(grid.times[-1])
    for check in args.check or ["martingale"]:
        if check == "martingale":
            rep = sim.verify_martingale_statistical(ens, s, t, args.bins, args.sigmas)
            rows.append(_stat_row(f"martingale {args.process} ({ens.kind}) s={s} t={t}", rep,
                                  "P(Omega|Z_t|F_s) = Z_s"))
        elif check == "moments":
            m = sim.moment_summary(ens, t)
            if ens.kind == "poisson":
                target = spec["lambda"] * t
                tv = target
            elif ens.kind == "brownian":
                target, tv = spec.get("mu", 0.0) * t, spec["sigma"] ** 2 * t
            else:
                target, tv = 0.0, None
            z = abs(m["mean"] - target) / m["mean_stderr"]
            rows.append({"property": f"mean at t={t}", "lhs": m["mean"], "rhs": target,
                         "residual": abs(m["mean"] - target),
                         "stderr": m["mean_stderr"], "sigmas": z, "pass": z <= args.sigmas,
                         "paper_ref": "<N_t> = lambda t / <X_t> = mu t"})
            if tv is not None:
                zv = abs(m["var"] - tv) / m["var_stderr"]
                rows.append({"property": f"variance at t={t}", "lhs": m["var"], "rhs": tv,
                             "residual": abs(m["var"] - tv),
                             "stderr": m["var_stderr"], "sigmas": zv, "pass": zv <= args.sigmas,
                             "paper_ref": "variance lambda t / sigma^2 t"})
        elif check == "increments":
            rep = sim.independent_increments_check(ens, s, t, args.sigmas, seed=args.seed)
            rows.append({"property": f"independent increments s={s} t={t}",
                         "lhs": rep.correlation, "rhs": 0.0,
                         "residual": abs(rep.correlation), "stderr": 1.0 / np.sqrt(ens.n_paths),
                         "sigmas": rep.corr_sigmas, "pass": rep.passed, **{
                             k: v for k, v in rep.to_dict().items() if k != "pass"},
                         "paper_ref": "increments over disjoint intervals are independent"})
        else:
            raise UsageError(f"unknown check {check!r}")
    report = RunReport(f"simulate {args.process}", model.digest, args.seed, rows)
    return _emit(report, args, out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="JSON model file")
    common.add_argument("--json", action="store_true", help="emit a JSON report")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--sigmas", type=float, default=4.0)

    p = argparse.ArgumentParser(prog="pbn", description="Probability bracket calculator")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common], help="evaluate a bracket expression")
    e.add_argument("--expr", required=True)
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("check", parents=[common], help="run a verification suite")
    c.add_argument("suite", choices=sorted(SUITES))
    c.add_argument("--process")
    c.add_argument("--horizon", type=int, default=6)
    c.add_argument("--chain")
    c.add_argument("--m", type=int, default=2)
    c.add_argument("--n", type=int, default=2)
    c.add_argument("--rv")
    c.add_argument("--event-a")
    c.add_argument("--event-b")
    c.add_argument("--outcomes", type=int, default=8)
    c.add_argument("--check", action="append")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("simulate", parents=[common], help="sample a continuous-time process")
    s.add_argument("--process")
    s.add_argument("--paths", type=int, default=100_000)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--check", action="append", choices=["martingale", "moments", "increments"])
    s.add_argument("--transform", choices=["none", "compensate", "quadratic"])
    s.add_argument("--s", type=float, default=0.5)
    s.add_argument("--t", type=float)
    s.add_argument("--bins", type=int, default=8)
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("dims", parents=[common], help="check dimensional consistency")
    d.add_argument("--check", action="append", required=True)
    d.set_defaults(func=cmd_dims)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_PASS
    try:
        return args.func(args, out)
    except PBNSyntaxError as exc:
        err.write(f"syntax error at line {exc.line}, column {exc.column}\n{exc.caret()}\n")
        return EXIT_ERROR
    except (PBNError, KeyError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
