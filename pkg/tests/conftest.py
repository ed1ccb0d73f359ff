import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from varlen import build_series

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


def random_walk(n, seed=0):
    return np.cumsum(np.random.default_rng(seed).standard_normal(n))


@pytest.fixture
def walk():
    return build_series(random_walk(2000, seed=11), 0)


@pytest.fixture
def short_walk():
    return build_series(random_walk(600, seed=5), 0)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
