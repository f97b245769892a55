import numpy as np
import pytest

from oamturb.experiments import Scenario, SweepConfig, run_sweep
from oamturb.grid import GridSpec

WAIST = 0.1
WAVELENGTH = 1550e-9

# Lines appended by tests/test_acceptance.py, echoed after the run.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def grid():
    return GridSpec.for_waist(WAIST)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk_sweeps():
    """Full sweeps at N = 200, q in {1, 3, 5, 7}, w0/r0 = 0 .. 4, both scenarios.

    Shared by the acceptance module and the sweep invariant tests; about a
    minute of compute.
    """
    out = {}
    for scenario in Scenario:
        cfg = SweepConfig(scenario=scenario, ensemble_size=200, master_seed=2013)
        out[scenario] = (cfg, run_sweep(cfg))
    return out


@pytest.fixture(scope="session")
def kolmogorov_ensemble(grid):
    """500 default screens at w0/r0 = 2 and their structure function."""
    from oamturb.experiments import derive_seed
    from oamturb.turbulence import estimate_structure_function, generate_screen_pair

    r0 = WAIST / 2
    sf = None
    for k in range(250):
        part = estimate_structure_function(generate_screen_pair(grid, derive_seed(99, k), r0=r0))
        sf = part if sf is None else sf.merge(part)
    return r0, sf


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
