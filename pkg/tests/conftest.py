from __future__ import annotations

import pytest

from mgprot.network import build_testbed
from mgprot.scenario import default_testbed


@pytest.fixture(scope="session")
def testbed_cfg():
    return default_testbed()


@pytest.fixture(scope="session")
def grid_net(testbed_cfg):
    return build_testbed(testbed_cfg, "grid_connected")


@pytest.fixture(scope="session")
def island_net(testbed_cfg):
    return build_testbed(testbed_cfg, "islanded")
