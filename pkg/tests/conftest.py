import time
from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# numba compiles on first call, so the first example of a property can be slow
settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance reporting -------------------------------------------------

_ACCEPTANCE: list[tuple[int, str]] = []


class _Criterion:
    def __init__(self) -> None:
        self.failures: list[str] = []
        self.notes: list[str] = []

    def check(self, label: str, ok: bool, detail: str = "", show: bool = True) -> None:
        """Record one sub-check; passing ones appear in the line only when ``show``."""
        if ok and not show:
            return
        (self.notes if ok else self.failures).append(f"{label}{': ' + detail if detail else ''}")


@pytest.fixture
def criterion():
    """``with criterion(n, title, limit_s) as c: c.check(...)`` records one PASS/FAIL line."""

    @contextmanager
    def run(number: int, title: str, limit_s: float | None = None):
        c = _Criterion()
        t0 = time.perf_counter()
        error = None
        try:
            yield c
        except Exception as exc:  # recorded, then re-raised below
            error = exc
            c.failures.append(f"error: {exc!r}")
        elapsed = time.perf_counter() - t0
        if limit_s is not None and elapsed >= limit_s:
            c.failures.append(f"runtime {elapsed:.1f}s exceeds {limit_s:g}s")
        status = "PASS" if not c.failures else "FAIL"
        detail = "; ".join(c.failures or c.notes)
        line = f"criterion {number} {status} ({elapsed:.1f}s) {title}" + (f" | {detail}" if detail else "")
        _ACCEPTANCE.append((number, line))
        print(line)
        if error is not None:
            raise error
        assert not c.failures, line

    return run


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
