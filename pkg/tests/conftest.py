import sys

import numpy as np
import pytest

from epsrank.net import Network


def random_network(rng, d, depth, width, activation="tanh", scale=0.8):
    net = Network.zeros(d, depth, width, activation)
    flat = rng.uniform(-scale, scale, net.n_params)
    return net.with_flat(flat)


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
