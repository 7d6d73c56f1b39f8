import io
import json
import subprocess
import sys

import jsonschema
import pytest

from conftest import MODELS, ROOT
from pbn.cli import main

DIE = str(MODELS / "die.json")
CHAINS = str(MODELS / "chains.json")
PROCS = str(MODELS / "processes.json")
REPORT_SCHEMA = json.loads((ROOT / "docs" / "report.schema.json").read_text())


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv):
    code, out, err = run(*argv, "--json")
    doc = json.loads(out)
    jsonschema.validate(doc, REPORT_SCHEMA)
    return code, doc


def test_eval_prints_value():
    assert run("eval", "--model", DIE, "--expr", "E[X|H_even]")[:2] == (0, "4\n")
    assert run("eval", "--model", DIE, "--expr", "P(Omega|Omega)")[:2] == (0, "1\n")


def test_eval_json():
    code, doc = run_json("eval", "--model", DIE, "--expr", "E[x]")
    assert code == 0
    assert doc["value"] == pytest.approx(3.5) and doc["dimension"] == "L"
    code, doc = run_json("eval", "--model", DIE, "--expr", "phi(X, 1)")
    assert set(doc["value"]) == {"re", "im"}


def test_eval_syntax_error_has_caret():
    code, out, err = run("eval", "--model", DIE, "--expr", "P(A||B")
    assert code == 2 and out == ""
    lines = err.splitlines()
    assert "column 5" in lines[0]
    assert lines[1] == "P(A||B" and lines[2].index("^") == 4


@pytest.mark.parametrize("argv", [
    ("eval", "--model", "missing.json", "--expr", "1"),
    ("eval", "--model", DIE, "--expr", "P(Nope|Omega)"),
    ("eval", "--expr", "1"),
    ("check", "nonsense"),
    ("check", "martingale", "--model", CHAINS),
    ("check", "martingale", "--model", CHAINS, "--process", "nope"),
    ("simulate", "--model", CHAINS, "--process", "eigen"),
    ("dims", "--check", "x == y"),
])
def test_usage_and_model_errors_exit_2(argv):
    assert run(*argv)[0] == 2


def test_ce_properties_random_space():
    code, doc = run_json("check", "ce-properties", "--outcomes", "8")
    assert code == 0 and doc["pass"]
    assert doc["seed"] == 42 and doc["model_hash"] is None


def test_indicator_suite():
    code, doc = run_json("check", "indicator", "--model", DIE, "--rv", "X")
    assert code == 0
    assert all(c["residual"] <= 1e-10 for c in doc["checks"])


def test_chapman_kolmogorov():
    code, doc = run_json("check", "chapman-kolmogorov", "--model", CHAINS, "--chain", "two")
    assert code == 0
    assert max(c["residual"] for c in doc["checks"]) == 0.0


def test_martingale_pass_and_fail():
    code, doc = run_json("check", "martingale", "--model", CHAINS, "--process", "eigen",
                         "--horizon", "5")
    assert code == 0 and doc["pass"]
    code, doc = run_json("check", "martingale", "--model", CHAINS, "--process", "drift",
                         "--horizon", "6")
    assert code == 1
    assert doc["checks"][0]["classification"] == "submartingale"
    failed = [c for c in doc["checks"] if not c["pass"]]
    assert failed and all(c["paper_ref"] for c in failed)


def test_dims_command():
    code, doc = run_json("dims", "--model", DIE, "--check", "x*ket(x)*bra(x) == 1")
    assert code == 0
    code, doc = run_json("dims", "--model", DIE, "--check", "1 == ket(x)")
    assert code == 1 and "dL = 1/2" in doc["checks"][0]["message"]
    assert run("check", "dims", "--model", DIE, "--check", "density(x) == 1/x")[0] == 0


def test_simulate_compensated_poisson():
    code, doc = run_json("simulate", "--model", PROCS, "--process", "compensated_poisson",
                         "--paths", "20000")
    assert code == 0
    row = doc["checks"][0]
    assert {"stderr", "sigmas"} <= set(row)


def test_simulate_raw_poisson_fails():
    code, doc = run_json("simulate", "--model", PROCS, "--process", "poisson", "--paths", "20000")
    assert code == 1
    row = doc["checks"][0]
    assert abs(row["drift"] - 1.0) <= 4 * row["stderr"]


def test_simulate_too_few_paths():
    code, out, err = run("simulate", "--model", PROCS, "--process", "poisson", "--paths", "10")
    assert code == 2 and "1000" in err


def test_simulate_deterministic():
    argv = ("simulate", "--model", PROCS, "--process", "brownian", "--paths", "5000",
            "--check", "moments", "--seed", "5")
    a, b = run_json(*argv)[1], run_json(*argv, "--workers", "3")[1]
    assert a["checks"] == b["checks"]


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "pbn.cli", "eval", "--model", DIE,
                           "--expr", "P(H_even | Omega)"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.5"
