import math

import numpy as np
import pytest

from lqg_geodesy.field import GridSpec, mollify, sample_gff
from lqg_geodesy.metric import GAMMA_PURE_GRAVITY, MetricParams, WeightGrid, build_weights


@pytest.fixture(scope="session")
def spec64():
    return GridSpec(64, 4 / 64)


@pytest.fixture(scope="session")
def params():
    return MetricParams(GAMMA_PURE_GRAVITY)


@pytest.fixture(scope="session")
def field64(spec64):
    return mollify(sample_gff(spec64, 3), 4 * spec64.mesh)


@pytest.fixture(scope="session")
def weights64(field64, params):
    return build_weights(field64, params)


def uniform(rows, cols=None, value=1.0):
    return WeightGrid(np.full((rows, cols or rows), value))


def octile(di, dj):
    a, b = abs(di), abs(dj)
    return max(a, b) - min(a, b) + math.sqrt(2.0) * min(a, b)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
