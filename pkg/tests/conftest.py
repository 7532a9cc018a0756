import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from handgeom.anatomy import AnatomyStats, fit_stats
from handgeom.hand_model import random_fk_params

settings.register_profile("handgeom", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("handgeom")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def fk_corpus():
    rng = np.random.default_rng(99)
    return [random_fk_params(rng).build() for _ in range(200)]


@pytest.fixture(scope="session")
def corpus_stats(fk_corpus) -> AnatomyStats:
    return fit_stats(fk_corpus)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
