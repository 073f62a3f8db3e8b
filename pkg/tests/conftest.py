import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def zscore(values, exact):
    v = np.asarray(values, dtype=float).ravel()
    se = v.std(ddof=1) / np.sqrt(v.size)
    return abs(v.mean() - exact) / se if se > 0 else abs(v.mean() - exact) * np.inf


@pytest.fixture
def gen():
    return np.random.default_rng(20240601)


def random_hermitian(gen, d, scale=1.0):
    a = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
    return scale * (a + a.conj().T) / 2


ACCEPTANCE_LINES: list = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion; lines are echoed in the terminal summary."""

    def _report(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append((number, line))
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
