import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fblab.grid import GridSpec, VectorField
from fblab.variational import boundary_family, minimize_detailed

settings.register_profile(
    "fblab", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("fblab")

H = 1.0 / 256


def plane_field(spec, nu=None, f=None, slope=1.0, shift=0.0):
    """``slope * f <x, nu>^+`` (plus a shift inside the positive part)."""
    n, m = spec.dim_n, spec.dim_m
    nu = np.eye(n)[-1] if nu is None else np.asarray(nu, float)
    f = np.eye(m)[0] if f is None else np.asarray(f, float)
    s = sum(c * x for c, x in zip(nu, spec.mesh())) + shift
    s = slope * np.broadcast_to(np.maximum(s, 0.0), spec.shape)
    return VectorField(spec, np.stack([fi * s for fi in f]))


class _Runs:
    """Minimizer outputs at the default 2D grid, computed once per session."""

    def __init__(self):
        self._cache = {}

    def get(self, family, params=(), m=None):
        key = (family, tuple(params), m)
        if key not in self._cache:
            fn, mm = boundary_family(family, params, m)
            spec = GridSpec.unit(2, mm, H)
            self._cache[key] = minimize_detailed(fn, spec)
        return self._cache[key]


@pytest.fixture(scope="session")
def runs():
    return _Runs()


@pytest.fixture(scope="session")
def spec2():
    return GridSpec.unit(2, 1, 1 / 64)


# -- acceptance reporting ---------------------------------------------------

SUITE_BUDGET_S = 600.0
CRITERIA = []
_T0 = time.perf_counter()


def record(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    CRITERIA.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - _T0
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
        ok = elapsed <= SUITE_BUDGET_S
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'} criterion 9 (suite runtime): "
            f"{elapsed:.1f} s <= {SUITE_BUDGET_S:.0f} s"
        )


def pytest_sessionfinish(session, exitstatus):
    if CRITERIA and time.perf_counter() - _T0 > SUITE_BUDGET_S and exitstatus == 0:
        session.exitstatus = 1
