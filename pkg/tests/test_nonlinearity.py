import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlwave.errors import Overflow, ValidationError
from nlwave.nonlinearity import (
    NonlinearitySpec,
    f_eval,
    interaction,
    lipschitz_audit,
    lipschitz_sweep,
    potential_eval,
)
from nlwave.spectral import make_grid

from conftest import constant_table


def test_square_law():
    assert f_eval(np.array([[2.0]]), NonlinearitySpec(lam=1.0, gamma=1))[0, 0] == 4.0


def test_defocusing_cubic_sign():
    assert f_eval(np.array([[-2.0]]), NonlinearitySpec(lam=-1.0, gamma=2))[0, 0] == 8.0


def test_zero_maps_to_zero():
    u = np.zeros((2, 8))
    assert not f_eval(u, NonlinearitySpec(lam=3.0, gamma=3)).any()


def test_overflow_guard():
    with pytest.raises(Overflow):
        f_eval(np.array([[1e101]]), NonlinearitySpec(lam=1.0))
    with pytest.raises(Overflow):
        potential_eval(np.array([[np.inf]]), NonlinearitySpec(lam=1.0), make_grid(1, 1.0, 4))


def test_spec_validation():
    with pytest.raises(ValidationError):
        NonlinearitySpec(gamma=0)
    with pytest.raises(ValidationError):
        NonlinearitySpec(gamma=1.5)
    with pytest.raises(ValidationError):
        NonlinearitySpec(coupling=[[1.0, np.nan], [0.0, 1.0]])


def unit_measure_grid():
    return make_grid(1, 0.5, 8)  # box [-1/2, 1/2)


def test_potential_unit_field():
    grid = unit_measure_grid()
    assert potential_eval(np.ones((1, 8)), NonlinearitySpec(1.0, 1), grid) == pytest.approx(1 / 3, rel=1e-15)
    assert potential_eval(np.zeros((1, 8)), NonlinearitySpec(1.0, 1), grid) == 0.0
    assert potential_eval(-np.ones((1, 8)), NonlinearitySpec(3.0, 2), grid) == pytest.approx(0.75, rel=1e-15)


finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (2, 6), elements=finite), st.floats(-3, 3), st.integers(1, 4))
def test_odd_symmetry(u, lam, gamma):
    spec = NonlinearitySpec(lam=lam, gamma=gamma)
    np.testing.assert_array_equal(f_eval(-u, spec), -f_eval(u, spec))


@settings(max_examples=50, deadline=None)
@given(arrays(float, (1, 6), elements=st.floats(-10, 10)), st.floats(0.01, 10), st.integers(1, 4))
def test_homogeneity(u, c, gamma):
    spec = NonlinearitySpec(lam=1.5, gamma=gamma)
    lhs = f_eval(c * u, spec)
    rhs = c ** (gamma + 1) * f_eval(u, spec)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-13, atol=1e-300)


@pytest.mark.parametrize("gamma", [1, 2, 3])
def test_potential_derivative_matches_inner_product(gamma, rng):
    grid = make_grid(1, 2.0, 32)
    spec = NonlinearitySpec(lam=-0.7, gamma=gamma)
    u = rng.normal(size=(2, 32))
    d = rng.normal(size=(2, 32))
    eps = 1e-5
    fd = (potential_eval(u + eps * d, spec, grid) - potential_eval(u - eps * d, spec, grid)) / (2 * eps)
    exact = float(np.sum(f_eval(u, spec) * d) * grid.cell_volume)
    assert fd == pytest.approx(exact, rel=1e-6)


def test_coupling_mixes_before_power():
    spec = NonlinearitySpec(lam=1.0, gamma=1, coupling=[[1.0, 1.0], [0.0, 1.0]])
    u = np.array([[1.0], [2.0]])
    np.testing.assert_array_equal(f_eval(u, spec), [[9.0], [4.0]])


def test_interaction_is_inner_product(rng):
    grid = make_grid(1, 1.0, 16)
    spec = NonlinearitySpec(lam=2.0, gamma=2)
    u = rng.normal(size=(1, 16))
    # (f(u), u) = lam * sum |u|^4 h for the identity coupling
    assert interaction(u, spec, grid) == pytest.approx(2.0 * np.sum(u**4) * grid.h, rel=1e-14)


def test_audit_rejects_equal_fields():
    grid = make_grid(1, np.pi, 16)
    u = np.ones((1, 16))
    with pytest.raises(ValueError):
        lipschitz_audit(u, u.copy(), NonlinearitySpec(1.0), 0.0, constant_table(grid))


def test_audit_quadratic_lipschitz_bound():
    # for f = lam |u| u: |f(u) - f(v)| <= 2 |lam| M |u - v| pointwise, hence in L2
    grid = make_grid(1, np.pi, 64)
    table = constant_table(grid)
    lam = 1.3
    spec = NonlinearitySpec(lam=lam, gamma=1)
    for M in (0.1, 1.0, 5.0):
        reports = lipschitz_sweep(spec, table, s=0.0, sup_bound=M, pairs=100, seed=0)
        c_fit = max(r.ratio_difference / r.sup_bound for r in reports)
        assert c_fit <= 2 * lam + 1e-12
        assert all(r.sup_bound <= M * (1 + 1e-12) for r in reports)


def test_audit_homogeneity_in_l2(rng):
    grid = make_grid(1, np.pi, 32)
    table = constant_table(grid)
    u = rng.normal(size=(1, 32))
    v = rng.normal(size=(1, 32))
    for gamma in (1, 2, 3):
        spec = NonlinearitySpec(lam=1.0, gamma=gamma)
        r1 = lipschitz_audit(u, v, spec, 0.0, table)
        r2 = lipschitz_audit(2 * u, v, spec, 0.0, table)
        # |f(2u)|_0 / |2u|_0 = 2^gamma |f(u)|_0 / |u|_0
        assert r2.ratio_self == pytest.approx(2.0**gamma * r1.ratio_self, rel=1e-12)
