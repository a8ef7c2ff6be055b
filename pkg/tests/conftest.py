import numpy as np
import pytest

from safecov.density import GaussianDensity
from safecov.geometry import DomainPolygon


@pytest.fixture
def unit_square():
    return DomainPolygon.rectangle(0.0, 0.0, 1.0, 1.0)


@pytest.fixture
def arena():
    return DomainPolygon.rectangle(0.0, 0.0, 2.5, 2.5)


@pytest.fixture
def case_density():
    return GaussianDensity((1.75, 1.75), (0.3, 0.3))


def spread_points(domain, n, seed, min_sep=0.05):
    """Random generators inside ``domain``, not too close to each other."""
    rng = np.random.default_rng(seed)
    v = domain.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    pts = []
    while len(pts) < n:
        q = lo + (hi - lo) * rng.random(2)
        if domain.contains(q, tol=0.0) and all(np.hypot(*(q - p)) > min_sep for p in pts):
            pts.append(q)
    return np.array(pts)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
