import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lafdbscan.synthetic import sphere_mixture, unit_circle  # noqa: E402

CIRCLE_DEGREES = [0.0, 5.0, 10.0, 120.0, 125.0, 240.0]


@pytest.fixture
def circle6():
    """Six points on the unit circle: only the 5-degree point has three neighbours at eps 0.01."""
    return unit_circle(CIRCLE_DEGREES)


@pytest.fixture
def blobs():
    data, truth = sphere_mixture(300, 8, components=3, spread=0.5, background=0.1, seed=3)
    return data, truth


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
