import sys

import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("ci", max_examples=30, deadline=None)
hypothesis.settings.load_profile("ci")


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def inner(a, b):
    """<a, b> = sum a * conj(b)."""
    return np.vdot(b, a)


def adjoint_error(ax, y, x, aty):
    """Relative mismatch of <Ax, y> and <x, A^* y>."""
    num = abs(inner(ax, y) - inner(x, aty))
    return num / (np.linalg.norm(ax) * np.linalg.norm(y) + 1e-300)


def as_matrix(op, shape_in):
    """Dense matrix of a linear map by applying it to the standard basis."""
    size = int(np.prod(shape_in))
    cols = []
    for k in range(size):
        e = np.zeros(size)
        e[k] = 1.0
        cols.append(np.ravel(op(e.reshape(shape_in))))
    return np.stack(cols, axis=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20221)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
