import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from stochastic_stdp.model import NeuronParams, PlasticityParams, WeightMatrix

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

rates = st.floats(1e-3, 5.0)


@st.composite
def neurons(draw, beta=None):
    b = draw(rates) if beta is None else beta
    a_m = draw(st.floats(1e-3, 0.5))
    S0 = draw(st.floats(0.05, 3.0))
    sigma = draw(st.floats(0.05, 2.0))
    theta = draw(st.one_of(st.none(), st.floats(-20, 40)))
    if theta is None and S0 <= a_m:
        theta = 0.0
    return NeuronParams(b, a_m, S0, sigma, theta)


@st.composite
def plasticities(draw):
    return PlasticityParams(draw(st.floats(0, 1)), draw(st.floats(0, 1)), draw(st.floats(1, 50)),
                            draw(st.floats(1, 50)), 1.0, draw(st.floats(1e-4, 1)))


@st.composite
def weights(draw, n=None, k_max=60):
    n = draw(st.integers(2, 3)) if n is None else n
    K = np.array(draw(st.lists(st.integers(1, k_max), min_size=n * n, max_size=n * n))).reshape(n, n)
    np.fill_diagonal(K, 0)
    return WeightMatrix(K)


def random_weights(rng, n, k_max=60):
    K = rng.integers(1, k_max + 1, size=(n, n))
    np.fill_diagonal(K, 0)
    return WeightMatrix(K)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
