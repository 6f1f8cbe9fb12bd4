"""Acceptance PASS/FAIL reporting and Monte Carlo fits shared between test modules."""

import pytest

_LINES: list[str] = []


@pytest.fixture(scope="session")
def report():
    def record(name: str, ok: bool, detail: str) -> None:
        line = f"{name}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fh4_whittle():
    """Whittle fits (M_T = floor(T log T)) on 200 FH4 logs per horizon, keyed by (T, rep)."""
    from fhawkes.harness.runner import Task, default_threads, run_tasks

    tasks = [Task("FH4", r, i, T, estimators=("whittle",), mt_rules=("TlogT",))
             for i, T in enumerate((1250.0, 2500.0)) for r in range(200)]
    return {(t.T, t.rep): res.outcomes[0] for t, res in zip(tasks, run_tasks(tasks, default_threads()))}
