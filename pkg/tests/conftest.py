import sys
from pathlib import Path

import numpy as np
import pytest

from pbn.space import build_space

ROOT = Path(__file__).resolve().parents[1]
MODELS = ROOT / "models"


@pytest.fixture
def die():
    return build_space([str(i) for i in range(1, 7)], [1 / 6] * 6)


@pytest.fixture
def die_x(die):
    return die.rv(np.arange(1.0, 7.0), "X")


@pytest.fixture
def coin():
    return build_space(["H", "T"], [0.5, 0.5])


@pytest.fixture
def models_dir():
    return MODELS


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(acc.RESULTS):
        terminalreporter.write_line(acc.RESULTS[num])
