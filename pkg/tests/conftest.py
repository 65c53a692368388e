import contextlib

import numpy as np
import pytest

from qfisher.modelfile import BUNDLED, bundled
from qfisher.statemodel import UnitaryFamily, constant_family

from oracles import SX

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def families():
    return {name: bundled(name) for name in BUNDLED}


@pytest.fixture(scope="session")
def diag(families):
    return families["diagonal_qubit"]


@pytest.fixture(scope="session")
def path(families):
    return families["rotation_path"]


@pytest.fixture(scope="session")
def phase(families):
    return families["unitary_plus"]


@pytest.fixture(scope="session")
def damping(families):
    return families["amplitude_damping"]


@pytest.fixture(scope="session")
def qutrit(families):
    return families["qutrit_diagonal"]


@pytest.fixture(scope="session")
def mixed_phase():
    return UnitaryFamily(SX / 2, np.diag([0.75, 0.25]), ranges=[[-3, 3]])


@pytest.fixture(scope="session")
def const():
    return constant_family(np.diag([0.3, 0.7]), ranges=[[0, 1]])


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        try:
            yield
        except BaseException as exc:
            _ACCEPTANCE[number] = (False, f"{title}: {exc}".splitlines()[0])
            print(f"criterion {number}: FAIL {title}")
            raise
        _ACCEPTANCE[number] = (True, title)
        print(f"criterion {number}: PASS {title}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, text = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}")
