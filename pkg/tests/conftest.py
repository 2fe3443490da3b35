from __future__ import annotations

from hypothesis import HealthCheck, settings

settings.register_profile(
    "fracstep",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fracstep")

import pytest

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


class AcceptanceLog:
    def record(self, number: int, ok: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture(scope="session")
def acceptance() -> AcceptanceLog:
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
