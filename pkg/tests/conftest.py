import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("otoclab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("otoclab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long numerical runs (acceptance criteria)")


_ACCEPTANCE = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion and print it immediately."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def report(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
