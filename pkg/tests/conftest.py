from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from idncsim import ConnectivityMatrix, ImportanceMatrix, StatusMatrix

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

# Four-device line R1 - R2 - R3 - R4 and its three-packet status matrix.
LINE4 = [[1, 0.84, 0, 0], [0.84, 1, 0.75, 0], [0, 0.75, 1, 0.91], [0, 0, 0.91, 1]]
LINE4_GSM = [[1, 1, 0], [0, 1, 1], [0, 0, 1], [1, 0, 1]]


@pytest.fixture
def line_scm():
    return ConnectivityMatrix(LINE4)


@pytest.fixture
def line_gsm():
    return StatusMatrix(LINE4_GSM)


@pytest.fixture
def ones():
    return ImportanceMatrix.ones(4, 3)


@st.composite
def instances(draw, max_m=5, max_n=4, min_m=2):
    """Random (SCM, GSM) pair; every packet is held somewhere."""
    m = draw(st.integers(min_m, max_m))
    n = draw(st.integers(1, max_n))
    y = np.eye(m)
    for i in range(m):
        for k in range(i + 1, m):
            if draw(st.booleans()):
                y[i, k] = y[k, i] = draw(st.sampled_from([0.5, 0.65, 0.75, 0.9, 1.0]))
    f = np.array(draw(st.lists(st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=m, max_size=m)))
    for l in range(n):
        if f[:, l].all():
            f[draw(st.integers(0, m - 1)), l] = 0
    return ConnectivityMatrix(y), StatusMatrix(f)


# One line per acceptance criterion, filled by test_acceptance and echoed at the end of the run.
ACCEPTANCE: dict[int, str] = {}


def report(criterion: int, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
