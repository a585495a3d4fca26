import numpy as np
import pytest

from lqreg.basis import Grid, make_cosine_basis
from lqreg.operators import make_abel, to_coefficients


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=1234))


@pytest.fixture(scope="session")
def abel_coeff():
    grid = Grid.midpoint(128)
    basis = make_cosine_basis(grid, 32)
    return to_coefficients(make_abel(0.5, grid), basis)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}
N_CRITERIA = 10


class _Recorder:
    def __init__(self, number, detail=""):
        self.number = number
        self.detail = detail

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            ACCEPTANCE[self.number] = ("PASS", self.detail)
        else:
            reason = str(exc).splitlines()[0] if str(exc) else exc_type.__name__
            ACCEPTANCE[self.number] = ("FAIL", f"{self.detail} {reason}".strip())
        return False


@pytest.fixture
def criterion():
    return _Recorder


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        status, detail = ACCEPTANCE.get(n, ("FAIL", "not run"))
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
