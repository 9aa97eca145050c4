import numpy as np
import pytest

from nlwave.spectral import make_grid
from nlwave.symbols import (
    DispersionKernel,
    KernelSpec,
    NonlinearKernel,
    StiffnessKernel,
    build_symbol_table,
)


def constant_table(grid, a=0.0, m2=1.0, g_c=1.0, g_r=0.0, N=1):
    spec = KernelSpec(
        a=DispersionKernel("constant", c=a),
        A=(StiffnessKernel("constant", m2=m2),) * N,
        g=NonlinearKernel(c=g_c, r=g_r),
    )
    return build_symbol_table(grid, spec)


def random_real_field(rng, grid, N=1, mean_zero=False):
    u = rng.normal(size=grid.field_shape(N))
    if mean_zero:
        axes = tuple(range(1, grid.n + 1))
        u = u - u.mean(axis=axes, keepdims=True)
    return u


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def grid1():
    return make_grid(1, np.pi, 32)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
