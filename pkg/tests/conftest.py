import numpy as np
import pytest

from splinefil.bspline import make_spec
from splinefil.field import ScalarField


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spec59():
    return make_spec(5, 9)


@pytest.fixture
def random_field(spec59, rng):
    return ScalarField(spec59, rng.normal(size=spec59.dim))


def quadratic_theta(spec, fn):
    """Coefficients reproducing a polynomial of degree <= q-1 by interpolation at many points."""
    from splinefil.bspline import design_matrix

    g = np.linspace(0, 1, 3 * max(spec.shape))
    a, b = np.meshgrid(g, g, indexing="ij")
    xs = np.column_stack([a.ravel(), b.ravel()])
    theta, *_ = np.linalg.lstsq(design_matrix(spec, xs), fn(xs[:, 0], xs[:, 1]), rcond=None)
    return theta


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
