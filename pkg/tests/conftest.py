from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", deadline=None, derandomize=True, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def random_hermitian(rng, d, scale=1.0):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (x + x.conj().T)


def random_density(rng, d):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance reporting ----------------------------------------------------------------

_ACCEPTANCE: dict[int, dict] = {}


class Criterion:
    """Collects the measured numbers of one acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number, self.title, self.notes = number, title, []

    def note(self, text: str) -> None:
        self.notes.append(text)


@pytest.fixture
def criterion(request):
    mark = request.node.get_closest_marker("acceptance")
    crit = Criterion(*mark.args)
    _ACCEPTANCE[crit.number] = {"criterion": crit, "outcome": "not run"}
    return crit


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or mark.args[0] not in _ACCEPTANCE:
        return
    entry = _ACCEPTANCE[mark.args[0]]
    if report.when == "call" or (report.when == "setup" and report.failed):
        entry["outcome"] = "PASS" if report.passed else "FAIL"
        entry["duration"] = report.duration


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        entry = _ACCEPTANCE[number]
        crit = entry["criterion"]
        line = f"criterion {number} [{entry['outcome']}] {crit.title}"
        if "duration" in entry:
            line += f" ({entry['duration']:.1f} s)"
        terminalreporter.write_line(line)
        for text in crit.notes:
            terminalreporter.write_line(f"    {text}")
