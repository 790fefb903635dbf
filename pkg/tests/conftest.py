"""Shared fixtures.  Expensive evolutions are cached for the session."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from twoch.grid import Grid, State

ORACLES = Path(__file__).parent / "oracles" / "values.json"


@pytest.fixture(scope="session")
def oracle() -> dict:
    return json.loads(ORACLES.read_text())


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


def smooth_field(grid: Grid, rng: np.random.Generator, mmax: int, amp: float = 1.0) -> np.ndarray:
    """Random trigonometric polynomial with modes ``1..mmax`` plus a mean."""
    m = np.arange(grid.n // 2 + 1)
    coef = np.zeros(m.size, dtype=complex)
    live = (m >= 1) & (m <= mmax)
    coef[live] = (rng.standard_normal(live.sum()) + 1j * rng.standard_normal(live.sum())) / m[live]
    coef[0] = rng.standard_normal()
    f = np.fft.irfft(coef, grid.n)
    return amp * f / np.max(np.abs(f))


def smooth_state(grid: Grid, rng: np.random.Generator, mmax: int, amp: float = 0.3) -> State:
    return State.from_arrays(grid, smooth_field(grid, rng, mmax, amp), smooth_field(grid, rng, mmax, amp))


# acceptance reporting ----------------------------------------------------------

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record and print one ``criterion N: PASS|FAIL`` line."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
