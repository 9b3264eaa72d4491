import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from calib_atlas.outcomes import OutcomeSpace

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def binary():
    return OutcomeSpace.binary()


@pytest.fixture
def three():
    return OutcomeSpace(("0", "1", "2"), (0.0, 1.0, 2.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def verdict(n: int, ok: bool, detail: str) -> None:
        _CRITERIA[n] = (bool(ok), detail)
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, f"criterion {n}: {detail}"

    return verdict


def run_cli(*args, cwd=None, env_extra=None) -> subprocess.CompletedProcess:
    env = {**os.environ, **(env_extra or {})}
    return subprocess.run(
        [sys.executable, "-m", "calib_atlas.cli.main", *map(str, args)],
        capture_output=True, text=True, cwd=cwd, env=env,
    )


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
