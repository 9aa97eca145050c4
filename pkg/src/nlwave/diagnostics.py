"""Norms, the smoothing multiplier B, energies and the concavity blow-up test.

``B`` is the Fourier multiplier ``|xi|^-1 g_hat^-1/2``; its inverse square is
``-Laplacian g*``. B is singular at ``xi = 0`` so everything here works on the
mean-zero part of a state; the zero mode is reported separately.

Blow-up monitoring tracks ``H(t) = |Bu|^2 + b (t+t0)^2`` together with
``H'`` and ``H''``. ``H''`` is evaluated from the equation rather than by
differencing, using ``(Bu, Bu_tt) = -(B^2 eta^2 u, u) - (f(u), u)``. If
``H'' H - (1+nu) H'^2 >= 0`` from some time ``t_a`` with ``H(t_a), H'(t_a) > 0``,
then ``H^-nu`` is concave and must reach zero no later than
``t_a + H(t_a) / (nu H'(t_a))``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientTrace, NonzeroMean
from .nonlinearity import NonlinearitySpec, interaction, potential_eval
from .propagator import State
from .spectral import inverse_transform, l2_norm, sobolev_norm
from .symbols import SymbolTable

MEAN_RTOL = 1e-12

__all__ = [
    "sobolev_norm",
    "l2_norm",
    "frac_power_norm",
    "apply_B",
    "apply_B_inv",
    "energy",
    "EnergyReport",
    "BlowupMonitor",
    "blowup_update",
    "blowup_certify",
    "BlowupCertificate",
    "BlowupRefutation",
    "concavity_time_bound",
]


def frac_power_norm(spec: np.ndarray, table: SymbolTable, alpha: float) -> float:
    """L2 norm of the spectrum weighted by ``A_hat_j(xi)^alpha``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if (table.A_hat < 0).any():
        raise ValueError("fractional powers need A_hat >= 0")
    return l2_norm(table.A_hat**alpha * spec)


def _b_multiplier(table: SymbolTable) -> np.ndarray:
    grid = table.grid
    out = np.zeros(grid.shape)
    nz = grid.xi2 > 0
    out[nz] = 1.0 / (grid.abs_xi[nz] * np.sqrt(table.g_hat[nz]))
    return out


def _b2_multiplier(table: SymbolTable) -> np.ndarray:
    grid = table.grid
    out = np.zeros(grid.shape)
    nz = grid.xi2 > 0
    out[nz] = 1.0 / (grid.xi2[nz] * table.g_hat[nz])
    return out


def zero_mode(spec: np.ndarray, table: SymbolTable) -> np.ndarray:
    return spec[(slice(None),) + table.grid.zero_mode()].copy()


def project_mean_zero(spec: np.ndarray, table: SymbolTable) -> np.ndarray:
    out = np.array(spec, dtype=complex)
    out[(slice(None),) + table.grid.zero_mode()] = 0.0
    return out


def _has_mean(spec: np.ndarray, table: SymbolTable) -> bool:
    z = np.abs(zero_mode(spec, table)).max(initial=0.0)
    return z >= MEAN_RTOL * l2_norm(spec) and z > 0


def apply_B(spec: np.ndarray, table: SymbolTable, project: bool = False) -> np.ndarray:
    if _has_mean(spec, table) and not project:
        raise NonzeroMean("B needs a mean-zero spectrum (pass project=True to drop it)")
    return _b_multiplier(table) * spec


def apply_B_inv(spec: np.ndarray, table: SymbolTable) -> np.ndarray:
    grid = table.grid
    return (grid.abs_xi * np.sqrt(table.g_hat)) * spec


@dataclass
class EnergyReport:
    t: float
    kinetic: float
    elastic: float
    interaction_paper: float
    interaction_potential: float
    zero_mode_u: np.ndarray
    zero_mode_ut: np.ndarray

    @property
    def E_paper(self) -> float:
        return self.kinetic + self.elastic + self.interaction_paper

    @property
    def E_conserved(self) -> float:
        return self.kinetic + self.elastic + self.interaction_potential

    @property
    def gap(self) -> float:
        return self.E_paper - self.E_conserved


def _mean_zero_state(state: State, table: SymbolTable, warn: bool = True):
    u_hat, v_hat = state.u_hat, state.v_hat
    if _has_mean(u_hat, table) or _has_mean(v_hat, table):
        if warn:
            warnings.warn("state has a nonzero mean; diagnostics use its mean-zero part",
                          stacklevel=3)
        u_hat = project_mean_zero(u_hat, table)
        v_hat = project_mean_zero(v_hat, table)
    return u_hat, v_hat


def _quadratic_parts(u_hat, v_hat, table):
    b2 = _b2_multiplier(table)
    kinetic = float(np.sum(b2 * np.abs(v_hat) ** 2))
    elastic = float(np.sum(b2 * table.eta2 * np.abs(u_hat) ** 2))
    return b2, kinetic, elastic


def _interactions(u_hat, table, nl):
    if nl.is_linear:
        return 0.0, 0.0
    u = inverse_transform(u_hat, table.grid)
    return interaction(u, nl, table.grid), 2.0 * potential_eval(u, nl, table.grid)


def energy(state: State, table: SymbolTable, nl: NonlinearitySpec, warn: bool = True) -> EnergyReport:
    """Both energy functionals of the mean-zero part of ``state``.

    ``E_paper`` uses the interaction ``(f(u), u)``; ``E_conserved`` uses
    ``2 * int F(u)``, which is the form whose time derivative vanishes.
    """
    zu, zv = zero_mode(state.u_hat, table), zero_mode(state.v_hat, table)
    u_hat, v_hat = _mean_zero_state(state, table, warn)
    _, kinetic, elastic = _quadratic_parts(u_hat, v_hat, table)
    fu, two_f = _interactions(u_hat, table, nl)
    return EnergyReport(state.t, kinetic, elastic, fu, two_f, zu, zv)


@dataclass
class TraceSample:
    t: float
    H: float
    Hp: float
    Hpp: float
    Bu2: float = math.nan
    But2: float = math.nan


@dataclass
class BlowupMonitor:
    b: float
    t0: float
    E0: float = math.nan
    trace: list = field(default_factory=list)
    status: str = "running"

    def __post_init__(self):
        if not self.b > 0 or not self.t0 > 0:
            raise ValueError("blow-up monitor needs b > 0 and t0 > 0")

    def record(self, t, H, Hp, Hpp, Bu2=math.nan, But2=math.nan) -> None:
        if self.trace and not t > self.trace[-1].t:
            raise ValueError("trace times must increase strictly")
        if not H > 0:
            raise ValueError(f"H must stay positive, got {H}")
        self.trace.append(TraceSample(float(t), float(H), float(Hp), float(Hpp),
                                      float(Bu2), float(But2)))

    @classmethod
    def from_arrays(cls, t, H, Hp, Hpp, b=1.0, t0=1.0, E0=math.nan):
        mon = cls(b=b, t0=t0, E0=E0)
        for row in zip(t, H, Hp, Hpp):
            mon.record(*row)
        return mon

    def arrays(self):
        tr = self.trace
        cols = ("t", "H", "Hp", "Hpp", "Bu2", "But2")
        return {c: np.array([getattr(s, c) for s in tr]) for c in cols}


def h_values(state: State, table: SymbolTable, nl: NonlinearitySpec, b: float, t0: float,
             warn: bool = True):
    """``(H, H', H'', |Bu|^2, |Bu_t|^2)`` for one state."""
    u_hat, v_hat = _mean_zero_state(state, table, warn)
    b2, kinetic, elastic = _quadratic_parts(u_hat, v_hat, table)
    bu2 = float(np.sum(b2 * np.abs(u_hat) ** 2))
    cross = float(np.sum(b2 * np.real(u_hat * np.conj(v_hat))))
    fu, _ = _interactions(u_hat, table, nl)
    shift = state.t + t0
    H = bu2 + b * shift**2
    Hp = 2.0 * cross + 2.0 * b * shift
    Hpp = 2.0 * kinetic + 2.0 * (-elastic - fu) + 2.0 * b
    return H, Hp, Hpp, bu2, kinetic


def blowup_update(mon: BlowupMonitor, state: State, table: SymbolTable,
                  nl: NonlinearitySpec) -> BlowupMonitor:
    """Append ``(t, H, H', H'')`` for ``state``. Raises NonzeroMean on mean-carrying states."""
    if _has_mean(state.u_hat, table) or _has_mean(state.v_hat, table):
        raise NonzeroMean("blow-up monitoring needs a mean-zero state")
    mon.record(state.t, *h_values(state, table, nl, mon.b, mon.t0, warn=False))
    return mon


@dataclass
class BlowupCertificate:
    nu: float
    t_a: float
    t_b: float
    H_a: float
    Hp_a: float
    t1_bound: float
    concavity_min_slack: float
    b: float
    t0: float
    E0: float
    side_c1_slack: float
    side_c2_min_slack: float
    side_c3_min_slack: float
    side_conditions_hold: bool
    samples: int
    side_rows: list = field(default_factory=list, repr=False)

    def to_text(self) -> str:
        items = [
            ("status", "certified"),
            ("nu", self.nu),
            ("window_start", self.t_a),
            ("window_end", self.t_b),
            ("H_start", self.H_a),
            ("Hp_start", self.Hp_a),
            ("t1_bound", self.t1_bound),
            ("concavity_min_slack", self.concavity_min_slack),
            ("samples", self.samples),
            ("b", self.b),
            ("t0", self.t0),
            ("E0", self.E0),
            ("side_c1_slack", self.side_c1_slack),
            ("side_c2_min_slack", self.side_c2_min_slack),
            ("side_c3_min_slack", self.side_c3_min_slack),
            ("side_conditions_hold", self.side_conditions_hold),
        ]
        return "".join(f"{k}={_fmt(v)}\n" for k, v in items)


@dataclass
class BlowupRefutation:
    reason: str
    best_nu: float
    samples: int

    def to_text(self) -> str:
        return (f"status=refuted\nreason={self.reason}\n"
                f"best_nu={_fmt(self.best_nu)}\nsamples={self.samples}\n")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def concavity_time_bound(H_a: float, Hp_a: float, nu: float, t_a: float = 0.0) -> float:
    """Latest possible blow-up time ``t_a + H(t_a) / (nu H'(t_a))``."""
    if not (H_a > 0 and Hp_a > 0 and nu > 0):
        raise ValueError("need H > 0, H' > 0 and nu > 0")
    return t_a + H_a / (nu * Hp_a)


def nu_grid(nu_min: float = 1e-3, nu_max: float = 10.0, count: int = 1000) -> np.ndarray:
    return np.logspace(np.log10(nu_min), np.log10(nu_max), count)


def blowup_certify(mon: BlowupMonitor, nu_min: float = 1e-3, nu_max: float = 10.0,
                   nu_count: int = 1000, tol: float = 1e-8, min_window: int = 10):
    """Search the trace for a concavity window and the largest admissible nu.

    For each grid value of nu the test is
    ``H'' H - (1+nu) H'^2 >= -tol |H'' H|`` at every sample of the window
    ``[t_a, end]``. The earliest ``t_a`` with ``H'(t_a) > 0`` for which some
    grid nu qualifies (with at least ``min_window`` samples) is used.
    """
    n = len(mon.trace)
    if n < 10:
        raise InsufficientTrace(f"need at least 10 samples, got {n}")
    arr = mon.arrays()
    H, Hp, Hpp = arr["H"], arr["Hp"], arr["Hpp"]
    if not (H > 0).all():
        raise InsufficientTrace("H must be positive along the trace")
    if not (Hp > 0).any():
        raise InsufficientTrace("H' never becomes positive")
    grid_nu = nu_grid(nu_min, nu_max, nu_count)

    prod = Hpp * H
    lhs = prod + tol * np.abs(prod)
    with np.errstate(divide="ignore", invalid="ignore"):
        crit = np.where(Hp != 0, lhs / Hp**2 - 1.0, np.where(lhs >= 0, np.inf, -np.inf))
    suffix = np.minimum.accumulate(crit[::-1])[::-1]

    best = -np.inf
    for a in range(n - min_window + 1):
        if Hp[a] <= 0:
            continue
        best = max(best, suffix[a])
        ok = grid_nu[grid_nu <= suffix[a]]
        if ok.size:
            nu = float(ok[-1])
            return _certificate(mon, arr, a, nu, prod, tol)
    mon.status = "refuted"
    return BlowupRefutation(
        reason="no nu on the grid satisfies the concavity inequality on any window",
        best_nu=float(best),
        samples=n,
    )


def _certificate(mon, arr, a, nu, prod, tol):
    t, H, Hp = arr["t"], arr["H"], arr["Hp"]
    window = slice(a, None)
    slack = prod[window] - (1 + nu) * Hp[window] ** 2
    rel = slack / np.maximum(np.abs(prod[window]), np.finfo(float).tiny)
    b, t0, E0 = mon.b, mon.t0, mon.E0
    shift = t[window] + t0
    c1 = -E0 - (1 + 2 * nu) * b
    c2 = 2 * b - 2 * E0 - 4 * b * (1 + nu) * shift
    kappa1 = c2
    kappa2 = 4 * b * shift * (shift - (1 + nu))
    phi = 2 * b * (-E0 - (1 + 2 * nu) * b) * shift**2
    bu2, but2 = arr["Bu2"][window], arr["But2"][window]
    c3 = kappa1 * bu2 + kappa2 * but2 + phi - 4 * nu * bu2 * but2
    rows = list(zip(t[window], rel, c2, c3))
    finite_c3 = c3[np.isfinite(c3)]
    c3_min = float(finite_c3.min()) if finite_c3.size else math.nan
    hold = bool(np.isfinite(c1) and c1 >= 0 and (c2 >= 0).all()
                and finite_c3.size == c3.size and (c3 >= 0).all())
    mon.status = "certified"
    return BlowupCertificate(
        nu=nu,
        t_a=float(t[a]),
        t_b=float(t[-1]),
        H_a=float(H[a]),
        Hp_a=float(Hp[a]),
        t1_bound=concavity_time_bound(float(H[a]), float(Hp[a]), nu, float(t[a])),
        concavity_min_slack=float(rel.min()),
        b=b,
        t0=t0,
        E0=E0,
        side_c1_slack=float(c1),
        side_c2_min_slack=float(c2.min()),
        side_c3_min_slack=c3_min,
        side_conditions_hold=hold,
        samples=len(t) - a,
        side_rows=rows,
    )
