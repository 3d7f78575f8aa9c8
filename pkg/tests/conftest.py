from __future__ import annotations

import numpy as np
import pytest

from helpers import ACCEPTANCE, tiny_arch
from pmodl.neural import init_params


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def actor(rng):
    return init_params(tiny_arch("actor"), rng, final_scale=0.3)


@pytest.fixture
def critic(rng):
    return init_params(tiny_arch("critic"), rng, final_scale=0.3)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
