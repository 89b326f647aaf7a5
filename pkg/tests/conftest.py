import numpy as np
import pytest

from polypack import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


BACKENDS = ["python"] + (["cython"] if kernels.HAVE_CYTHON else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    from importlib import import_module
    try:
        mod = import_module("test_acceptance")
    except ImportError:
        return
    lines = [mod.RESULTS[k] for k in sorted(mod.RESULTS)]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
