import numpy as np
import pytest

from gridsens.builtin import data_path, demo_network
from gridsens.grid_model import load_config
from gridsens.matpower import load_case
from gridsens.network import network_from_directions


def random_stable(rng, n, radius=None):
    A = rng.standard_normal((n, n))
    r = max(abs(np.linalg.eigvals(A)))
    target = rng.uniform(0.05, 0.95) if radius is None else radius
    return A * (target / r)


def random_psd(rng, n, rank=None):
    G = rng.standard_normal((n, rank or n))
    return G @ G.T


def random_network(rng, n, links, radius=None):
    A = random_stable(rng, n, radius)
    dirs = [(rng.standard_normal(n), rng.standard_normal(n), rng.uniform(0.0, 0.3))
            for _ in range(links)]
    return network_from_directions(A, dirs)


@pytest.fixture(scope="session")
def case39():
    return load_case(data_path("case39"))


@pytest.fixture(scope="session")
def green():
    return load_config(data_path("green"))


@pytest.fixture(scope="session")
def red():
    return load_config(data_path("red"))


@pytest.fixture(scope="session")
def demo1():
    return demo_network(1)


@pytest.fixture(scope="session")
def demo2():
    return demo_network(2)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k])
