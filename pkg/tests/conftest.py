import numpy as np
import pytest

from spectemp.evalhar import SynthSpec, generate_synthetic
from spectemp.tempering import fit_model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_task():
    spec = SynthSpec(
        n_docs=800,
        n_queries=120,
        d=32,
        spikes=((3, 60.0), (6, 15.0), (8, 4.0)),
        noise_variance=1.0,
        query_noise=2.0,
        seed=7,
        query_drift=0.4,
    )
    return generate_synthetic(spec)


@pytest.fixture(scope="session")
def small_model(small_task):
    return fit_model(small_task.docs)


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
