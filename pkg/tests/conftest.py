from __future__ import annotations

import pytest
from hypothesis import settings

from ctrwfrac.measures import SpectralMeasure

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def cauchy_rho() -> SpectralMeasure:
    return SpectralMeasure.atomic([(1.0, 1.0)])


@pytest.fixture
def mixed_rho() -> SpectralMeasure:
    return SpectralMeasure.atomic([(0.8, 0.5), (1.2, 0.5)])


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(number: int, title: str, ok: bool, detail: str, runtime: float) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail} ({runtime:.2f} s)"
        lines.append((number, line))
        print("\n" + line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
