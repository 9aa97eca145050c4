"""Per-mode propagation with the cosine/sine symbols and a Picard stepper.

Every Fourier mode obeys ``u'' + eta^2 u = N(t)`` with the nonlinear forcing
``N = -|xi|^2 g_hat DFT(f(u))``. Over one step the variation-of-constants
formula is

    u(t+dt) = C u + S v + int_0^dt S(dt-s) N(t+s) ds
    v(t+dt) = -eta^2 S u + C v + int_0^dt C(dt-s) N(t+s) ds

with ``C = cos(eta dt)`` and ``S = sin(eta dt)/eta``. Freezing ``N`` at the
step midpoint gives the weights ``W0 = (1 - cos(eta dt))/eta^2`` for ``u`` and
``S`` for ``v``. The midpoint value of ``u`` is the average of the current
state and the end-of-step iterate, so the update is implicit and solved by
fixed-point iteration.
"""
from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import MaxIterExceeded, NonContraction, Overflow, StepperError
from .nonlinearity import NonlinearitySpec, f_eval
from .spectral import forward_transform, inverse_transform, sobolev_norm
from .symbols import SymbolTable

SERIES_THRESHOLD = 1e-4
STALL_LIMIT = 3


@dataclass
class State:
    t: float
    u_hat: np.ndarray
    v_hat: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.u_hat.copy(), self.v_hat.copy())


@dataclass(frozen=True, eq=False)
class StepWeights:
    dt: float
    C: np.ndarray
    S: np.ndarray
    W0: np.ndarray
    eta2: np.ndarray


@dataclass
class PicardStats:
    iterations: int
    residual: float
    contraction: float
    residuals: list = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        r = self.residuals
        return all(b < a for a, b in zip(r, r[1:]))


def make_weights(table: SymbolTable, dt: float) -> StepWeights:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    eta = table.eta
    x = eta * dt
    C = np.cos(x)
    small = x < SERIES_THRESHOLD
    with np.errstate(divide="ignore", invalid="ignore"):
        S = np.where(small, 0.0, np.sin(x) / eta)
        W0 = np.where(small, 0.0, (1.0 - C) / (eta * eta))
    x2 = x[small] ** 2
    S[small] = dt * (1.0 - x2 / 6.0 + x2**2 / 120.0 - x2**3 / 5040.0)
    W0[small] = dt**2 * (0.5 - x2 / 24.0 + x2**2 / 720.0 - x2**3 / 40320.0)
    return StepWeights(dt=float(dt), C=C, S=S, W0=W0, eta2=eta * eta)


def linear_step(state: State, w: StepWeights) -> State:
    u, v = state.u_hat, state.v_hat
    u_new = w.C * u + w.S * v
    v_new = -w.eta2 * w.S * u + w.C * v
    return State(state.t + w.dt, u_new, v_new)


def forced_step(state: State, w: StepWeights, forcing: Callable[[float], np.ndarray]) -> State:
    """Linear step plus the midpoint Duhamel contribution of ``forcing(t)``."""
    out = linear_step(state, w)
    g = forcing(state.t + 0.5 * w.dt)
    out.u_hat = out.u_hat + w.W0 * g
    out.v_hat = out.v_hat + w.S * g
    return out


def dealias_mask(table: SymbolTable) -> np.ndarray:
    """2/3-rule mask: keep modes with |k| < M/3 along every axis."""
    grid = table.grid
    k = np.abs(np.fft.fftfreq(grid.M, d=1.0 / grid.M))
    keep = k < grid.M / 3.0
    mask = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.n):
        shape = [1] * grid.n
        shape[axis] = grid.M
        mask = mask & keep.reshape(shape)
    return mask


def nonlinear_forcing(u_hat: np.ndarray, table: SymbolTable, nl: NonlinearitySpec,
                      mask: np.ndarray | None = None) -> np.ndarray:
    """Spectral form of ``Laplacian[g * f(u)]``: ``-|xi|^2 g_hat DFT(f(u))``."""
    grid = table.grid
    u = inverse_transform(u_hat, grid)
    out = -(grid.xi2 * table.g_hat) * forward_transform(f_eval(u, nl), grid)
    if mask is not None:
        out = out * mask
    return out


def _sup(a: np.ndarray) -> float:
    return float(np.abs(a).max(initial=0.0))


def picard_step(state: State, w: StepWeights, table: SymbolTable, nl: NonlinearitySpec,
                tol: float = 1e-12, max_iter: int = 50, forcing=None, mask=None):
    """One implicit midpoint-Duhamel step solved by Picard iteration.

    The residual is the sup over modes of the change between successive
    end-of-step iterates, relative to the sup of the newest iterate. Raises
    :class:`NonContraction` when the residual fails to decrease three times
    in a row (or the iterate overflows) and :class:`MaxIterExceeded` when
    ``max_iter`` iterations do not reach ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    lin = linear_step(state, w)
    if nl.is_linear and forcing is None:
        return lin, PicardStats(iterations=1, residual=0.0, contraction=0.0, residuals=[0.0])

    t_mid = state.t + 0.5 * w.dt
    g_ext = forcing(t_mid) if forcing is not None else None

    def midpoint_forcing(u_end):
        if nl.is_linear:
            out = 0.0
        else:
            out = nonlinear_forcing(0.5 * (state.u_hat + u_end), table, nl, mask)
        if g_ext is not None:
            out = out + g_ext
        return out

    u_iter = lin.u_hat
    residuals = []
    stalls = 0
    for k in range(1, max_iter + 1):
        try:
            n_hat = midpoint_forcing(u_iter)
        except Overflow as exc:
            stats = PicardStats(k, float("inf"), float("inf"), residuals)
            raise NonContraction(f"iterate overflowed at iteration {k}", stats, state.t) from exc
        u_next = lin.u_hat + w.W0 * n_hat
        scale = _sup(u_next)
        diff = _sup(u_next - u_iter)
        res = diff / scale if scale > 0 else diff
        if not math.isfinite(res):
            stats = PicardStats(k, res, float("inf"), residuals)
            raise NonContraction(f"non-finite residual at iteration {k}", stats, state.t)
        if residuals and res >= residuals[-1]:
            stalls += 1
        else:
            stalls = 0
        residuals.append(res)
        u_iter = u_next
        if res <= tol:
            v_next = lin.v_hat + w.S * n_hat
            return State(lin.t, u_iter, v_next), PicardStats(
                k, res, _contraction(residuals), residuals
            )
        if stalls >= STALL_LIMIT:
            stats = PicardStats(k, res, _contraction(residuals), residuals)
            raise NonContraction(
                f"residual did not decrease for {STALL_LIMIT} iterations", stats, state.t
            )
    stats = PicardStats(max_iter, residuals[-1], _contraction(residuals), residuals)
    raise MaxIterExceeded(f"no convergence to {tol:g} in {max_iter} iterations", stats, state.t)


def _contraction(residuals) -> float:
    ratios = [b / a for a, b in zip(residuals, residuals[1:]) if a > 0]
    return max(ratios) if ratios else 0.0


@dataclass
class Trajectory:
    final: State
    steps: int
    stop_reason: str
    times: list = field(default_factory=list)
    series: list = field(default_factory=list)
    max_iterations: int = 0
    max_contraction: float = 0.0
    error: StepperError | None = None
    wall_time: float = 0.0


def run(initial: State, table: SymbolTable, nl: NonlinearitySpec, dt: float, T: float, *,
        tol: float = 1e-12, max_iter: int = 50, dealias: bool = False, forcing=None,
        cadence: int = 1, record: Callable[[State], object] | None = None,
        on_step: Callable[[int, State], None] | None = None,
        sup_factor: float | None = 1e8, sobolev_factor: float | None = None,
        sobolev_s: float = 1.0) -> Trajectory:
    """Advance ``initial`` with :func:`picard_step` until ``t >= T`` or a stop trigger.

    ``record(state)`` is called every ``cadence`` steps (never for the initial
    state) and its return values are collected in ``series``. Stop triggers:
    ``norm_threshold`` (sup-norm of u exceeds ``sup_factor`` times its
    initial value), ``sobolev_threshold`` (H^s norm exceeds
    ``sobolev_factor`` times its initial value) and ``non_contraction``.
    Other stepper errors propagate with their ``t`` attribute set.
    """
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    started = _time.perf_counter()
    grid = table.grid
    w = make_weights(table, dt)
    mask = dealias_mask(table) if dealias else None
    n_steps = 0 if T <= initial.t else int(math.ceil((T - initial.t) / dt - 1e-9))
    sup0 = _sup(inverse_transform(initial.u_hat, grid))
    hs0 = sobolev_norm(initial.u_hat, grid, sobolev_s)
    state = initial
    traj = Trajectory(final=initial, steps=0, stop_reason="completed")
    for step in range(1, n_steps + 1):
        try:
            state, stats = picard_step(state, w, table, nl, tol, max_iter, forcing, mask)
        except NonContraction as exc:
            exc.t = state.t
            traj.stop_reason = "non_contraction"
            traj.error = exc
            break
        except StepperError as exc:
            exc.t = state.t
            raise
        except Overflow as exc:
            exc.t = state.t
            raise
        state.t = initial.t + step * dt
        traj.steps = step
        traj.max_iterations = max(traj.max_iterations, stats.iterations)
        traj.max_contraction = max(traj.max_contraction, stats.contraction)
        if on_step is not None:
            on_step(step, state)
        if record is not None and step % cadence == 0:
            traj.times.append(state.t)
            traj.series.append(record(state))
        reason = _stop_trigger(state, grid, sup0, hs0, sup_factor, sobolev_factor, sobolev_s)
        if reason is not None:
            traj.stop_reason = reason
            if record is not None and step % cadence != 0:
                traj.times.append(state.t)
                traj.series.append(record(state))
            break
    traj.final = state
    traj.wall_time = _time.perf_counter() - started
    return traj


def _stop_trigger(state, grid, sup0, hs0, sup_factor, sobolev_factor, s):
    if sup_factor is not None and sup0 > 0:
        if _sup(inverse_transform(state.u_hat, grid)) > sup_factor * sup0:
            return "norm_threshold"
    if sobolev_factor is not None and hs0 > 0:
        if sobolev_norm(state.u_hat, grid, s) > sobolev_factor * hs0:
            return "sobolev_threshold"
    return None
