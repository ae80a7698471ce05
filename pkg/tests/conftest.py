import math

import numpy as np
import pytest

from horseshoe import cli, core
from horseshoe.integrator import IntegratorConfig, propagate

# lines collected by the acceptance module, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def preset_cfg():
    return cli.parse_config("[scenario]\npreset = janus-epimetheus\n")


@pytest.fixture(scope="session")
def preset_canonical(preset_cfg):
    """(canonical state, UnitSystem, orbital period in canonical time) of the preset."""
    state, units = core.normalize(preset_cfg.system_state().to_barycentric(), preset_cfg.ref_radius())
    return state, units, 2 * math.pi


@pytest.fixture(scope="session")
def year(preset_canonical):
    return 365.25 * 86400.0 / preset_canonical[1].time_unit


@pytest.fixture(scope="session")
def preset_20yr(preset_canonical, year):
    """The preset propagated 20 yr at T/2000, sampled ten times per orbit."""
    state, units, period = preset_canonical
    cfg = IntegratorConfig(step=period / 2000, output_stride=200)
    return propagate(state, cfg, 20 * year, units=units)


def circular_two_body(gm=1.0, a=1.0):
    """Unit circular orbit of a test particle; the third body is massless and far away."""
    v = math.sqrt(gm / a)
    return core.SystemState.from_arrays(
        0.0,
        [[0.0, 0.0], [a, 0.0], [1e6, 0.0]],
        [[0.0, 0.0], [0.0, v], [0.0, 0.0]],
        np.array([gm, 0.0, 0.0]),
    )
