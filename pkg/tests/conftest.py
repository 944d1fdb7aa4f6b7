import time

import numpy as np
import pytest

from semsimp.delaunay import reconstruct
from semsimp.labeling import label_cloud
from semsimp.synthetic import UNKNOWN, make_main_scene

# lines collected by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def main_scene():
    t0 = time.perf_counter()
    scene = make_main_scene(seed=0)
    labeled = label_cloud(scene.cloud, scene.cameras, scene.rasters, UNKNOWN)
    return scene, labeled, time.perf_counter() - t0


@pytest.fixture(scope="session")
def baseline_surface(main_scene):
    scene, labeled, _ = main_scene
    t0 = time.perf_counter()
    surface, _ = reconstruct(labeled, scene.cameras, labeled.visibility)
    return surface, time.perf_counter() - t0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
