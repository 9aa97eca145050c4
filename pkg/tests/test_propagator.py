import math

import numpy as np
import pytest

from nlwave.errors import MaxIterExceeded, NonContraction
from nlwave.nonlinearity import NonlinearitySpec
from nlwave.propagator import (
    State,
    forced_step,
    linear_step,
    make_weights,
    nonlinear_forcing,
    picard_step,
    run,
)
from nlwave.spectral import forward_transform, inverse_transform, make_grid, sobolev_norm
from nlwave.symbols import DispersionKernel, KernelSpec, NonlinearKernel, StiffnessKernel, build_symbol_table

from conftest import constant_table

LINEAR = NonlinearitySpec(lam=0.0)


def single(value, grid, N=1):
    return np.full(grid.field_shape(N), value, dtype=complex)


@pytest.fixture
def g8():
    return make_grid(1, np.pi, 8)


def test_weights_half_period(g8):
    w = make_weights(constant_table(g8, m2=4.0), math.pi / 2)
    np.testing.assert_allclose(w.C, -1.0, atol=1e-15)
    np.testing.assert_allclose(w.S, 0.0, atol=1e-16)


def test_weights_zero_eta(g8):
    dt = 0.3
    w = make_weights(constant_table(g8, m2=0.0), dt)
    np.testing.assert_array_equal(w.C, 1.0)
    np.testing.assert_allclose(w.S, dt, rtol=1e-16)
    np.testing.assert_allclose(w.W0, dt * dt / 2, rtol=1e-16)


def test_weights_w0_at_pi(g8):
    w = make_weights(constant_table(g8, m2=1.0), math.pi)
    np.testing.assert_allclose(w.W0, 2.0, rtol=1e-15)


def test_weights_invariants_and_series_continuity():
    grid = make_grid(1, 50.0, 64)
    table = build_symbol_table(grid, KernelSpec(a=DispersionKernel("constant", c=1.0)))
    for dt in (1e-7, 1e-3, 0.37):
        w = make_weights(table, dt)
        np.testing.assert_allclose(w.C**2 + (table.eta * w.S) ** 2, 1.0, atol=1e-12)
    # series branch against the closed form just above the switch
    eta = 1.0001e-4 / 1.0
    x = eta * 1.0
    closed_S = math.sin(x) / eta
    x2 = x * x
    series_S = 1.0 - x2 / 6 + x2**2 / 120 - x2**3 / 5040
    assert series_S == pytest.approx(closed_S, rel=1e-12)
    closed_W0 = 2 * math.sin(x / 2) ** 2 / eta**2
    series_W0 = 0.5 - x2 / 24 + x2**2 / 720 - x2**3 / 40320
    assert series_W0 == pytest.approx(closed_W0, rel=1e-12)


def test_linear_step_cosine_half_period(g8):
    w = make_weights(constant_table(g8, m2=4.0), math.pi / 2)
    out = linear_step(State(0.0, single(1.0, g8), single(0.0, g8)), w)
    np.testing.assert_allclose(out.u_hat, -1.0, atol=1e-15)
    np.testing.assert_allclose(out.v_hat, 0.0, atol=1e-15)
    assert out.t == math.pi / 2


def test_linear_step_sine_quarter_period(g8):
    w = make_weights(constant_table(g8, m2=1.0), math.pi / 2)
    out = linear_step(State(0.0, single(0.0, g8), single(1.0, g8)), w)
    np.testing.assert_allclose(out.u_hat, 1.0, atol=1e-15)
    np.testing.assert_allclose(out.v_hat, 0.0, atol=1e-15)


def test_linear_step_free_drift(g8):
    w = make_weights(constant_table(g8, m2=0.0), 0.25)
    out = linear_step(State(0.0, single(2.0, g8), single(-3.0, g8)), w)
    np.testing.assert_allclose(out.u_hat, 2.0 - 0.75)
    np.testing.assert_allclose(out.v_hat, -3.0)


def test_forced_step_zero_forcing(g8):
    w = make_weights(constant_table(g8, m2=2.0), 0.1)
    s = State(0.0, single(1.0, g8), single(0.5, g8))
    a = forced_step(s, w, lambda t: np.zeros(g8.field_shape(1)))
    b = linear_step(s, w)
    np.testing.assert_array_equal(a.u_hat, b.u_hat)
    np.testing.assert_array_equal(a.v_hat, b.v_hat)


@pytest.mark.parametrize("dt", [0.1, 0.7, 2.0])
def test_forced_step_constant_forcing_exact(g8, dt):
    w = make_weights(constant_table(g8, m2=1.0), dt)
    s = State(0.0, single(0.0, g8), single(0.0, g8))
    out = forced_step(s, w, lambda t: single(1.0, g8))
    # u'' + u = 1, u(0) = u'(0) = 0  ->  u = 1 - cos t, u' = sin t
    np.testing.assert_allclose(out.u_hat, 1 - math.cos(dt), atol=1e-15)
    np.testing.assert_allclose(out.v_hat, math.sin(dt), atol=1e-15)


def test_forced_step_global_order(g8):
    table = constant_table(g8, m2=1.0)

    def forcing(t):
        return single(math.cos(3 * t), g8)

    def exact(t):
        # u'' + u = cos 3t, u(0) = 0.3, u'(0) = -0.2
        return (0.3 + 1 / 8) * math.cos(t) - 0.2 * math.sin(t) - math.cos(3 * t) / 8

    def error(dt, T=2.0):
        s = State(0.0, single(0.3, g8), single(-0.2, g8))
        w = make_weights(table, dt)
        for _ in range(round(T / dt)):
            s = forced_step(s, w, forcing)
        return abs(s.u_hat[0, 0] - exact(T))

    errs = [error(dt) for dt in (0.04, 0.02, 0.01)]
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert ((orders > 1.9) & (orders < 2.1)).all(), orders


def smooth_state(grid, amp, N=1):
    u = amp * np.exp(-(grid.coords[0] ** 2))
    u = np.broadcast_to(u, grid.field_shape(N))
    uh = forward_transform(u, grid)
    uh[:, 0] = 0.0
    return State(0.0, uh, np.zeros_like(uh))


def nl_table(grid):
    spec = KernelSpec(a=DispersionKernel("constant", c=0.0), A=(StiffnessKernel("rational"),),
                      g=NonlinearKernel(1.0, 2.0))
    return build_symbol_table(grid, spec)


def test_picard_linear_is_linear_step():
    grid = make_grid(1, 8.0, 64)
    table = nl_table(grid)
    s = smooth_state(grid, 0.5)
    w = make_weights(table, 0.05)
    out, stats = picard_step(s, w, table, LINEAR)
    ref = linear_step(s, w)
    assert stats.iterations == 1
    np.testing.assert_array_equal(out.u_hat, ref.u_hat)
    np.testing.assert_array_equal(out.v_hat, ref.v_hat)


def test_picard_small_data_contracts():
    grid = make_grid(1, 8.0, 64)
    table = nl_table(grid)
    s = smooth_state(grid, 1e-3)
    out, stats = picard_step(s, make_weights(table, 0.05), table, NonlinearitySpec(1.0, 1))
    assert stats.contraction < 0.1
    assert stats.monotone
    assert stats.residual <= 1e-12


def test_picard_huge_data_diverges():
    grid = make_grid(1, 8.0, 64)
    table = nl_table(grid)
    s = smooth_state(grid, 1e6)
    with pytest.raises(NonContraction) as info:
        picard_step(s, make_weights(table, 1.0), table, NonlinearitySpec(1.0, 2))
    assert info.value.stats is not None


def test_picard_max_iter():
    grid = make_grid(1, 8.0, 64)
    table = nl_table(grid)
    s = smooth_state(grid, 0.5)
    with pytest.raises(MaxIterExceeded):
        picard_step(s, make_weights(table, 0.1), table, NonlinearitySpec(1.0, 1), tol=1e-15, max_iter=2)


def test_semigroup_property(rng):
    grid = make_grid(1, 4.0, 32)
    table = build_symbol_table(grid, KernelSpec(a=DispersionKernel("gaussian", w=5.0),
                                                A=(StiffnessKernel("constant", m2=0.3),)))
    u = forward_transform(rng.normal(size=(1, 32)), grid)
    v = forward_transform(rng.normal(size=(1, 32)), grid)
    s = State(0.0, u, v)
    dt = 0.013
    w = make_weights(table, dt)
    many = s
    for _ in range(100):
        many = linear_step(many, w)
    once = linear_step(s, make_weights(table, 100 * dt))
    scale = np.abs(once.u_hat).max()
    assert np.abs(many.u_hat - once.u_hat).max() <= 1e-11 * scale
    assert np.abs(many.v_hat - once.v_hat).max() <= 1e-11 * np.abs(once.v_hat).max()


def test_quadratic_invariant_per_mode(rng):
    grid = make_grid(1, 3.0, 32)
    table = build_symbol_table(grid, KernelSpec(a=DispersionKernel("constant", c=1.0),
                                                A=(StiffnessKernel("constant", m2=0.5),)))
    s = State(0.0, forward_transform(rng.normal(size=(1, 32)), grid),
              forward_transform(rng.normal(size=(1, 32)), grid))
    q0 = table.eta2 * np.abs(s.u_hat) ** 2 + np.abs(s.v_hat) ** 2
    w = make_weights(table, 0.07)
    for _ in range(200):
        s = linear_step(s, w)
    q = table.eta2 * np.abs(s.u_hat) ** 2 + np.abs(s.v_hat) ** 2
    np.testing.assert_allclose(q, q0, rtol=1e-11)


def test_self_convergence_order():
    grid = make_grid(1, 10.0, 128)
    table = nl_table(grid)
    s = smooth_state(grid, 0.5)
    nl = NonlinearitySpec(1.0, 2)
    finals = []
    for dt in (0.08, 0.04, 0.02, 0.01):
        tr = run(s, table, nl, dt, 2.0)
        finals.append(tr.final.u_hat)
    e = [np.abs(a - b).max() for a, b in zip(finals, finals[1:])]
    orders = np.log2(np.array(e[:-1]) / e[1:])
    assert ((orders >= 1.8) & (orders <= 2.2)).all(), orders


def test_run_is_deterministic():
    grid = make_grid(1, 10.0, 64)
    table = nl_table(grid)
    s = smooth_state(grid, 0.5)
    nl = NonlinearitySpec(1.0, 1)
    a = run(s, table, nl, 0.05, 1.0)
    b = run(s, table, nl, 0.05, 1.0)
    assert a.final.u_hat.tobytes() == b.final.u_hat.tobytes()
    assert a.final.v_hat.tobytes() == b.final.v_hat.tobytes()


def test_run_zero_time():
    grid = make_grid(1, 10.0, 64)
    table = nl_table(grid)
    s = smooth_state(grid, 0.5)
    tr = run(s, table, NonlinearitySpec(1.0, 1), 0.1, 0.0, record=lambda st: st.t)
    assert tr.final is s and tr.series == [] and tr.steps == 0


def test_linear_run_conserves_phase_space_norm():
    grid = make_grid(1, np.pi, 32)
    table = constant_table(grid, a=1.0, m2=1.0)
    x = grid.coords[0]
    u = forward_transform((np.cos(x) + 0.3 * np.sin(3 * x))[None], grid)
    v = forward_transform((0.2 * np.cos(2 * x))[None], grid)
    s = State(0.0, u, v)
    for T in (0.37, 5.0):
        tr = run(s, table, LINEAR, 0.01, T)
        for sob in (0.0, 1.0, 2.5):
            n0 = sobolev_norm(table.eta * s.u_hat, grid, sob) ** 2 + sobolev_norm(s.v_hat, grid, sob) ** 2
            n1 = sobolev_norm(table.eta * tr.final.u_hat, grid, sob) ** 2 + sobolev_norm(tr.final.v_hat, grid, sob) ** 2
            assert n1 == pytest.approx(n0, rel=1e-10)
    # after a full period of the single |xi|=1 mode the plain H^s norm returns too
    single_mode = State(0.0, forward_transform(np.cos(x)[None], grid), np.zeros_like(u))
    period = 2 * math.pi / math.sqrt(2)
    tr = run(single_mode, table, LINEAR, period / 1000, period)
    assert sobolev_norm(tr.final.u_hat, grid, 1.0) == pytest.approx(sobolev_norm(single_mode.u_hat, grid, 1.0), rel=1e-10)


def test_run_stops_on_norm_threshold():
    grid = make_grid(1, 10.0, 64)
    table = nl_table(grid)
    s = smooth_state(grid, 3.0)
    tr = run(s, table, NonlinearitySpec(-1.0, 2), 1e-3, 10.0, sup_factor=10.0, max_iter=200)
    assert tr.stop_reason == "norm_threshold"
    assert tr.final.t < 10.0
    peak = np.abs(inverse_transform(tr.final.u_hat, grid)).max()
    assert peak > 10 * np.abs(inverse_transform(s.u_hat, grid)).max()


def test_run_reports_non_contraction():
    grid = make_grid(1, 10.0, 64)
    table = nl_table(grid)
    s = smooth_state(grid, 3.0)
    tr = run(s, table, NonlinearitySpec(-1.0, 2), 0.5, 10.0, sup_factor=1e8)
    assert tr.stop_reason == "non_contraction"
    assert tr.error is not None and tr.error.t == tr.final.t


def test_dealias_mask_changes_only_high_modes():
    grid = make_grid(1, 10.0, 64)
    table = nl_table(grid)
    s = smooth_state(grid, 0.5)
    nl = NonlinearitySpec(1.0, 2)
    a = run(s, table, nl, 0.05, 0.5)
    b = run(s, table, nl, 0.05, 0.5, dealias=True)
    k = np.abs(np.fft.fftfreq(64, 1 / 64))
    diff = np.abs(a.final.u_hat - b.final.u_hat)[0]
    assert diff[k >= 64 / 3].max() > 0
    assert diff.max() < 1e-3 * np.abs(a.final.u_hat).max()


def integral_form_defect(dt, T=1.0):
    # a = 0: u(t) = u0 + t v0 + int_0^t (t - tau) [-A_hat u + N(u)](tau) dtau
    grid = make_grid(1, 10.0, 64)
    table = nl_table(grid)
    nl = NonlinearitySpec(1.0, 1)
    s0 = smooth_state(grid, 0.5)
    s0 = State(0.0, s0.u_hat, 0.2 * s0.u_hat)
    tr = run(s0, table, nl, dt, T, record=lambda st: st.u_hat)
    us = [s0.u_hat] + tr.series
    rhs = np.array([-table.A_hat * u + nonlinear_forcing(u, table, nl) for u in us])
    taus = dt * np.arange(len(us))
    weights = np.full(len(us), dt)
    weights[[0, -1]] = dt / 2
    integral = np.tensordot(weights * (T - taus), rhs, axes=1)
    predicted = s0.u_hat + T * s0.v_hat + integral
    return np.abs(tr.final.u_hat - predicted).max()


def test_trajectory_satisfies_integral_form():
    errs = [integral_form_defect(dt) for dt in (0.04, 0.02, 0.01)]
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert errs[-1] < 1e-4
    assert (orders > 1.8).all(), orders
