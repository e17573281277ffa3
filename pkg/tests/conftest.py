import numpy as np
import pytest
from hypothesis import strategies as st

from nsmpi.benchmarks import GarnetSpec, garnet_mdp

# Lines collected by test_acceptance.py and printed after the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@st.composite
def garnets(draw, max_states=6, max_actions=3):
    S = draw(st.integers(1, max_states))
    A = draw(st.integers(1, max_actions))
    b = draw(st.integers(1, S))
    seed = draw(st.integers(0, 2**32 - 1))
    gamma = draw(st.sampled_from([0.3, 0.5, 0.8, 0.9, 0.95]))
    return garnet_mdp(GarnetSpec(S, A, b, seed, gamma))


def random_garnet(rng, max_states=30, max_actions=4, gamma=None):
    S = int(rng.integers(2, max_states + 1))
    A = int(rng.integers(1, max_actions + 1))
    b = int(rng.integers(1, S + 1))
    g = float(rng.uniform(0.5, 0.95)) if gamma is None else gamma
    return garnet_mdp(GarnetSpec(S, A, b, int(rng.integers(2**32)), g))


def random_policy(rng, mdp):
    return rng.integers(0, mdp.num_actions, size=mdp.num_states)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
