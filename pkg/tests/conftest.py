import numpy as np
import pytest

from sensalign import _kernels


@pytest.fixture(params=[impl.name for impl in _kernels.implementations()])
def backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    impl = {i.name: i for i in _kernels.implementations()}[request.param]
    monkeypatch.setattr(_kernels, "_active", impl)
    return impl


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session", autouse=True)
def _jit_warm():
    _kernels.warmup()


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.REPORT:
            terminalreporter.write_line(line)
