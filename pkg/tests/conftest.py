import numpy as np
import pytest

from occbody.body_model import make_test_body
from occbody.dataset import ParameterPool


@pytest.fixture(scope="session")
def model():
    return make_test_body()


@pytest.fixture(scope="session")
def pool(model):
    return ParameterPool.random(model, 32, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


class FixedNormal:
    """Stand-in generator whose standard-normal draws are a fixed value."""

    def __init__(self, z=0.0):
        self.z = z

    def normal(self, loc=0.0, scale=1.0, size=None):
        out = np.asarray(loc, dtype=float) + np.asarray(scale, dtype=float) * self.z
        if size is not None:
            out = np.broadcast_to(out, np.atleast_1d(size)).copy()
        return out if out.ndim else float(out)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
