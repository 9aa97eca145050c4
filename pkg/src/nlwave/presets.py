"""Named experiment presets, some with closed-form oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .config import (
    DiagnosticsConfig,
    ForcingConfig,
    GridConfig,
    InitialConfig,
    ProfileConfig,
    RunConfig,
    TimeConfig,
    validate,
)
from .errors import UnknownPreset
from .nonlinearity import NonlinearitySpec
from .symbols import DispersionKernel, KernelSpec, NonlinearKernel, StiffnessKernel


@dataclass(frozen=True)
class Oracle:
    """Exact solution ``u(x, t)``, its time derivative, and the forcing that makes it exact.

    Callables take the tuple of coordinate arrays and a time and return an
    array of shape ``(N,) + grid.shape``.
    """

    u: Callable
    ut: Callable
    forcing: Callable | None = None


@dataclass(frozen=True)
class PresetCase:
    name: str
    config: RunConfig
    oracle: Oracle | None = None


def _kg_kernel():
    return KernelSpec(a=DispersionKernel("constant", c=1.0), A=(StiffnessKernel("constant", m2=1.0),),
                      g=NonlinearKernel(c=1.0, r=0.0))


def imbq_kernel(N: int = 1) -> KernelSpec:
    """Double-dispersion reading: a = 0, A_hat = |xi|^2 g_hat, g_hat = (1+|xi|^2)^-1."""
    return KernelSpec(a=DispersionKernel("constant", c=0.0),
                      A=(StiffnessKernel("rational"),) * N,
                      g=NonlinearKernel(c=1.0, r=2.0))


def klein_gordon_mode() -> PresetCase:
    omega = math.sqrt(2.0)  # eta at |xi| = 1 with a = A = 1
    cfg = RunConfig(
        grid=GridConfig(n=1, L=math.pi, M=64),
        kernel=_kg_kernel(),
        nonlinearity=NonlinearitySpec(lam=0.0, gamma=1),
        time=TimeConfig(dt=0.01, T=10.0),
        diagnostics=DiagnosticsConfig(cadence=100),
        initial=InitialConfig(u=ProfileConfig(profile="single_mode", mode=1, shape="cos"),
                              ut=ProfileConfig(profile="zero")),
    )

    def u(x, t):
        return (np.cos(x[0]) * math.cos(omega * t))[None]

    def ut(x, t):
        return (-omega * np.cos(x[0]) * math.sin(omega * t))[None]

    return PresetCase("klein_gordon_mode", cfg, Oracle(u, ut))


def forced_linear() -> PresetCase:
    # u = sin(x) cos(2t) solves u_tt + eta^2 u = (eta^2 - 4) sin(x) cos(2t), eta^2 = 2 at |xi| = 1
    eta2, omega = 2.0, 2.0
    amp = eta2 - omega**2
    cfg = RunConfig(
        grid=GridConfig(n=1, L=math.pi, M=32),
        kernel=_kg_kernel(),
        nonlinearity=NonlinearitySpec(lam=0.0, gamma=1),
        time=TimeConfig(dt=0.01, T=1.0),
        diagnostics=DiagnosticsConfig(cadence=10),
        initial=InitialConfig(u=ProfileConfig(profile="single_mode", mode=1, shape="sin"),
                              ut=ProfileConfig(profile="zero")),
        forcing=ForcingConfig(kind="standing_wave", amplitude=amp, mode=1, omega=omega,
                              shape="sin"),
    )

    def u(x, t):
        return (np.sin(x[0]) * math.cos(omega * t))[None]

    def ut(x, t):
        return (-omega * np.sin(x[0]) * math.sin(omega * t))[None]

    def forcing(x, t):
        return (amp * np.sin(x[0]) * math.cos(omega * t))[None]

    return PresetCase("forced_linear", cfg, Oracle(u, ut, forcing))


def imbq_like() -> PresetCase:
    cfg = RunConfig(
        grid=GridConfig(n=1, L=10 * math.pi, M=256),
        kernel=imbq_kernel(),
        nonlinearity=NonlinearitySpec(lam=1.0, gamma=1),
        time=TimeConfig(dt=0.05, T=5.0),
        diagnostics=DiagnosticsConfig(cadence=10),
        initial=InitialConfig(u=ProfileConfig(profile="gaussian", amplitude=0.1, width=2.0),
                              ut=ProfileConfig(profile="zero")),
    )
    return PresetCase("imbq_like", cfg)


BLOWUP_AMPLITUDE = 4.0
BLOWUP_WIDTH = 1.0


def focusing_blowup() -> PresetCase:
    """Focusing cubic nonlinearity with negative initial energy.

    ``b`` is set to a quarter of ``-E_paper(0)`` so the concavity inequality has
    room; ``t0`` is fixed. Both are computed here and emitted as numbers.
    """
    base = RunConfig(
        grid=GridConfig(n=1, L=8 * math.pi, M=256),
        kernel=imbq_kernel(),
        nonlinearity=NonlinearitySpec(lam=-1.0, gamma=2),
        time=TimeConfig(dt=2.5e-4, T=5.0, tol=1e-12, max_iter=100),
        diagnostics=DiagnosticsConfig(cadence=10, blowup=True, sup_factor=50.0),
        initial=InitialConfig(
            u=ProfileConfig(profile="gaussian", amplitude=BLOWUP_AMPLITUDE, width=BLOWUP_WIDTH),
            ut=ProfileConfig(profile="zero"),
        ),
    )
    # local imports: runner depends on this module's siblings only
    from .diagnostics import energy
    from .runner import build_grid, build_table, initial_state

    grid = build_grid(base)
    table = build_table(base, grid)
    e0 = energy(initial_state(base, grid), table, base.nonlinearity, warn=False)
    b = -0.25 * min(e0.E_paper, e0.E_conserved)
    cfg = replace(base, diagnostics=replace(base.diagnostics, b=float(b), t0=1.0))
    return PresetCase("focusing_blowup", cfg)


DYADIC_AMPLITUDES = (0.2, 0.1, 0.05, 0.15)


def dyadic_system_N4() -> PresetCase:
    kernel = KernelSpec(
        a=DispersionKernel("constant", c=1.0),
        A=tuple(StiffnessKernel("dyadic", sigma=1.0, profile="one") for _ in range(4)),
        g=NonlinearKernel(c=1.0, r=2.0),
    )
    cfg = RunConfig(
        grid=GridConfig(n=1, L=math.pi, M=64),
        kernel=kernel,
        nonlinearity=NonlinearitySpec(lam=0.5, gamma=1),
        time=TimeConfig(dt=0.01, T=1.0, tol=1e-14),
        diagnostics=DiagnosticsConfig(cadence=10),
        initial=InitialConfig(
            u=ProfileConfig(profile="gaussian", amplitude=DYADIC_AMPLITUDES, width=0.5),
            ut=ProfileConfig(profile="zero"),
        ),
    )
    return PresetCase("dyadic_system_N4", cfg)


def scalar_component(cfg: RunConfig, j: int) -> RunConfig:
    """Single-component config reproducing component ``j`` (0-based) of a diagonal system."""
    entry = cfg.kernel.A[j]
    if entry.kind == "dyadic" and entry.index is None:
        entry = replace(entry, index=j + 1)
    kernel = replace(cfg.kernel, A=(entry,))

    def pick(p):
        if isinstance(p.amplitude, tuple):
            return replace(p, amplitude=p.amplitude[j])
        return p

    init = replace(cfg.initial, u=pick(cfg.initial.u), ut=pick(cfg.initial.ut))
    nl = replace(cfg.nonlinearity, coupling=None)
    return replace(cfg, kernel=kernel, initial=init, nonlinearity=nl)


PRESETS = {
    "klein_gordon_mode": klein_gordon_mode,
    "forced_linear": forced_linear,
    "imbq_like": imbq_like,
    "focusing_blowup": focusing_blowup,
    "dyadic_system_N4": dyadic_system_N4,
}


def manufactured_case(name: str) -> PresetCase:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    case = factory()
    return replace(case, config=validate(case.config))
