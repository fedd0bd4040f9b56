import numpy as np
import pytest

from vlcnoma.config import load_scenario
from vlcnoma.receiver import trace_channels
from vlcnoma.runner import build_access_points, build_noise, build_receiver, build_scene

PAPER_APS = [(1.0, 1.0, 3.0), (1.0, 3.0, 3.0)]
PAPER_USERS = [(0.5, 0.5, 1.0), (0.5, 1.5, 1.0), (1.5, 2.5, 1.0), (1.5, 3.5, 1.0)]


@pytest.fixture(scope="session")
def paper_config():
    return load_scenario("paper_scenario")


@pytest.fixture(scope="session")
def paper_scene(paper_config):
    return build_scene(paper_config)


@pytest.fixture(scope="session")
def paper_aps(paper_config):
    return build_access_points(paper_config)


@pytest.fixture(scope="session")
def paper_noise(paper_config):
    return build_noise(paper_config)


@pytest.fixture(scope="session")
def paper_channels(paper_config, paper_scene, paper_aps):
    """Second-order channels for both receiver kinds, traced once per session."""
    out = {}
    for kind in ("adr", "wide"):
        rx = [build_receiver(paper_config, kind, u.position, paper_scene.room) for u in paper_config.users]
        out[kind] = trace_channels(paper_scene, paper_aps, rx, paper_config.user_ids, max_order=2)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20201017)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
