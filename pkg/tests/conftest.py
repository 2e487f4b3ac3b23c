import numpy as np
import pytest

from xicanon.kernel import KernelContext

#: PASS/FAIL lines collected by the acceptance tests, echoed in the summary.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ctx15():
    return KernelContext(1.5)


@pytest.fixture(scope="session")
def ctx125():
    return KernelContext(1.25)


@pytest.fixture(scope="session")
def mcurve15():
    """The m-curve on [1, 2] at omega = 1.5, built once for the session."""
    from xicanon import verification as ver

    return ver.shared_mcurve(1.5)


@pytest.fixture
def record():
    """Append one ``PASS``/``FAIL`` line per acceptance criterion and print it."""

    def _record(number, results, gate=True):
        ok = all(r.passed for r in results)
        flag = ("PASS" if ok else "FAIL") if gate else "INFO"
        parts = []
        for r in results:
            shown = ", ".join(f"{k}={v:.3g}" for k, v in list(r.values.items())[:6])
            parts.append(f"{r.name}: {shown}" + (f" [{r.detail}]" if r.detail else ""))
        line = f"criterion {number} {flag} " + "; ".join(parts)
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _record


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
