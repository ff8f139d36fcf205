import numpy as np
import pytest

from qfeatures import _fallback, kernels

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _backends():
    out = [pytest.param(_fallback, id="python")]
    core = kernels.compiled()
    if core is not None:
        out.append(pytest.param(core, id="compiled"))
    return out


@pytest.fixture(params=_backends())
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    mod = request.param
    monkeypatch.setattr(kernels, "run_gates", mod.run_gates)
    monkeypatch.setattr(kernels, "cd_epoch", mod.cd_epoch)
    monkeypatch.setattr(kernels, "project", mod.project)
    return mod


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
