import numpy as np
import pytest

from beamvar import BeamParams, Grid, ObstacleSpec, minimize_constrained, minimize_reduced


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def global_branch():
    p = BeamParams(1.0, 0.01)
    g = Grid.uniform(1024)
    return p, g, minimize_reduced(p, g)


@pytest.fixture(scope="session")
def local_branch():
    p = BeamParams(1.0, 0.01)
    spec = ObstacleSpec(p.lam)
    g = spec.grid(1024)
    return p, spec, g, minimize_constrained(p, spec, g)


@pytest.fixture(scope="session")
def jump_branch():
    p = BeamParams(2.0, 0.02)
    spec = ObstacleSpec(p.lam)
    g = spec.grid(1024)
    return p, spec, g, minimize_constrained(p, spec, g)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
