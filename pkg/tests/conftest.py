import numpy as np
import pytest
from hypothesis import settings

from mdinew.quantum import make_rng, named_state
from mdinew.witness import InputBasis, make_bundle

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture(scope="session")
def basis2():
    return InputBasis.standard(2, 2)


@pytest.fixture(scope="session")
def singlet():
    return named_state("singlet")


@pytest.fixture(scope="session")
def singlet_bundle(singlet, basis2):
    return make_bundle(singlet, "default", basis2)


SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


ACCEPTANCE_LINES: list[str] = []


def report(n: int, ok: bool, detail: str):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
