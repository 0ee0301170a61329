import numpy as np
import pytest

from dcabc import RandomSource


@pytest.fixture
def rng():
    return RandomSource(20240601)


@pytest.fixture
def np_rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion."""
    def record(label: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[label] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s[2:])):
        ok, detail = _ACCEPTANCE[label]
        terminalreporter.write_line(f"{label} {'PASS' if ok else 'FAIL'}: {detail}")
