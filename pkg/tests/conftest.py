import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("aese", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("aese")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one verdict line per acceptance criterion, echoed after the run so that the
# lines survive output capture
VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
