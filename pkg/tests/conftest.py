import numpy as np
import pytest

from evfuse import _fallback, kernels

BACKENDS = ["python"]
try:
    from evfuse import _kernels
    BACKENDS.append("cython")
except ImportError:  # extension not built
    _kernels = None


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    module = _fallback if request.param == "python" else _kernels
    monkeypatch.setattr(kernels, "_backend", module)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance criteria report one line each at the end of the run.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
