import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from diffbound import _core_py
from diffbound.data import Dataset

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

try:
    from diffbound import _core as _core_c
except ImportError:  # compiled kernels not built
    _core_c = None

BACKENDS = [_core_py] + ([_core_c] if _core_c is not None else [])

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def core(request):
    return request.param


@pytest.fixture
def record_criterion():
    """Record one PASS/FAIL line for the acceptance summary."""
    def _record(number, ok, detail):
        _ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def make_dataset(rng, n=200, l=2, effect=2.0, confounded=True):
    """Small synthetic dataset with all four treatment cells populated."""
    x = rng.standard_normal((n, l))
    z2 = (rng.random(n) < 0.5).astype(np.int8)
    lin = -0.3 + 0.8 * z2 + (0.5 * x[:, 0] if confounded else 0.0)
    z1 = (rng.random(n) < 1 / (1 + np.exp(-lin))).astype(np.int8)
    y = effect * z1 + x.sum(axis=1) + rng.standard_normal(n)
    return Dataset(y, z1, z2, x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
