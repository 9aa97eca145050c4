"""Fourier symbols of the convolution kernels and their admissibility audit.

Kernels are never built in physical space. Each of ``a``, ``A`` and ``g`` is a
named family evaluated directly on the mode lattice:

* ``a``: ``constant`` (``c``), ``gaussian`` (``exp(-|xi|^2/w)``) or
  ``rational`` (``(1+|xi|^2)^(-q/2)``);
* ``A`` (one entry per component, diagonal): ``constant`` (``m2``),
  ``dyadic`` (``profile(xi) * 2^(sigma*j)`` with ``j`` the 1-based component
  index) or ``rational`` (``|xi|^2 / (1+|xi|^2)``);
* ``g``: ``c * (1+|xi|^2)^(-r/2)``.

The per-mode frequency is ``eta_j = sqrt(a_hat |xi|^2 + A_hat_j)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateFit, NegativeSymbol, ValidationError
from .spectral import Grid

A_KINDS = ("constant", "gaussian", "rational")
STIFFNESS_KINDS = ("constant", "dyadic", "rational")
PROFILES = ("one", "gaussian", "rational")


@dataclass(frozen=True)
class DispersionKernel:
    """Symbol family for ``a``."""

    kind: str = "constant"
    c: float = 1.0
    w: float = 1.0
    q: float = 2.0

    def validate(self, where="kernel.a"):
        if self.kind not in A_KINDS:
            raise ValidationError(f"{where}.kind", f"must be one of {A_KINDS}")
        if not np.isfinite(self.c):
            raise ValidationError(f"{where}.c", "must be finite")
        if self.kind == "gaussian" and not self.w > 0:
            raise ValidationError(f"{where}.w", "must be > 0")
        if self.kind == "rational" and not self.q >= 0:
            raise ValidationError(f"{where}.q", "must be >= 0")

    def evaluate(self, xi2: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(xi2, self.c, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-xi2 / self.w)
        return (1.0 + xi2) ** (-self.q / 2)


@dataclass(frozen=True)
class StiffnessKernel:
    """Symbol family for one diagonal entry of ``A``.

    ``index`` overrides the dyadic exponent index; by default the entry's own
    1-based component position is used.
    """

    kind: str = "constant"
    m2: float = 0.0
    sigma: float = 1.0
    profile: str = "one"
    width: float = 1.0
    index: int | None = None

    def validate(self, where="kernel.A"):
        if self.kind not in STIFFNESS_KINDS:
            raise ValidationError(f"{where}.kind", f"must be one of {STIFFNESS_KINDS}")
        if not np.isfinite(self.m2):
            raise ValidationError(f"{where}.m2", "must be finite")
        if self.kind == "dyadic":
            if not self.sigma > 0:
                raise ValidationError(f"{where}.sigma", "must be > 0")
            if self.profile not in PROFILES:
                raise ValidationError(f"{where}.profile", f"must be one of {PROFILES}")
            if not self.width > 0:
                raise ValidationError(f"{where}.width", "must be > 0")
            if self.index is not None and self.index < 1:
                raise ValidationError(f"{where}.index", "must be >= 1")

    def _profile(self, xi2):
        if self.profile == "one":
            return np.ones_like(xi2, dtype=float)
        if self.profile == "gaussian":
            return np.exp(-xi2 / self.width)
        return 1.0 / (1.0 + xi2 / self.width)

    def evaluate(self, xi2: np.ndarray, j: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(xi2, self.m2, dtype=float)
        if self.kind == "dyadic":
            idx = self.index if self.index is not None else j
            return self._profile(xi2) * 2.0 ** (self.sigma * idx)
        return xi2 / (1.0 + xi2)


@dataclass(frozen=True)
class NonlinearKernel:
    """``g_hat = c * (1+|xi|^2)^(-r/2)``."""

    c: float = 1.0
    r: float = 0.0

    def validate(self, where="kernel.g"):
        if not self.c > 0:
            raise ValidationError(f"{where}.c", "must be > 0")
        if not self.r >= 0:
            raise ValidationError(f"{where}.r", "must be >= 0")

    def evaluate(self, xi2: np.ndarray) -> np.ndarray:
        return self.c * (1.0 + xi2) ** (-self.r / 2)


@dataclass(frozen=True)
class KernelSpec:
    a: DispersionKernel = field(default_factory=DispersionKernel)
    A: tuple = (StiffnessKernel(),)
    g: NonlinearKernel = field(default_factory=NonlinearKernel)

    @property
    def N(self) -> int:
        return len(self.A)

    def validate(self):
        if self.N < 1:
            raise ValidationError("kernel.A", "needs at least one component")
        self.a.validate()
        for j, entry in enumerate(self.A):
            entry.validate(f"kernel.A[{j}]")
        self.g.validate()
        return self


@dataclass(frozen=True, eq=False)
class SymbolTable:
    grid: Grid
    a_hat: np.ndarray
    g_hat: np.ndarray
    A_hat: np.ndarray
    eta: np.ndarray

    @property
    def N(self) -> int:
        return self.A_hat.shape[0]

    @property
    def eta2(self) -> np.ndarray:
        return self.a_hat * self.grid.xi2 + self.A_hat


def build_symbol_table(grid: Grid, spec: KernelSpec) -> SymbolTable:
    """Evaluate all symbols on the grid; sign errors surface as NegativeSymbol."""
    spec.validate()
    xi2 = grid.xi2
    a_hat = spec.a.evaluate(xi2)
    g_hat = spec.g.evaluate(xi2)
    A_hat = np.stack([entry.evaluate(xi2, j + 1) for j, entry in enumerate(spec.A)])
    eta2 = a_hat * xi2 + A_hat
    if (eta2 < 0).any():
        raise NegativeSymbol(f"a_hat|xi|^2 + A_hat reaches {eta2.min():.3e} < 0")
    for arr in (a_hat, g_hat, A_hat):
        arr.setflags(write=False)
    eta = np.sqrt(eta2)
    eta.setflags(write=False)
    return SymbolTable(grid=grid, a_hat=a_hat, g_hat=g_hat, A_hat=A_hat, eta=eta)


class DecayFit(NamedTuple):
    r: float
    residual: float
    c_g: float


def fit_decay_exponent(g_hat: np.ndarray, grid: Grid) -> DecayFit:
    """Least-squares fit of ``log g_hat`` against ``log(1+|xi|^2)``.

    Modes are first averaged over |xi| shells so the lattice degeneracy does
    not weight the fit. ``r = -2 * slope``; ``residual`` is the RMS misfit of
    the shell values and ``c_g`` the recovered prefactor.
    """
    g_hat = np.asarray(g_hat, dtype=float)
    if g_hat.shape != grid.shape:
        g_hat = g_hat.reshape(grid.shape)
    if not (g_hat > 0).all():
        raise DegenerateFit("g_hat must be positive to fit a power law")
    shell_key = np.round(grid.xi2.ravel(), 9)
    shells, inverse = np.unique(shell_key, return_inverse=True)
    if shells.size < 3:
        raise DegenerateFit(f"only {shells.size} distinct |xi| shells")
    logg = np.log(g_hat.ravel())
    counts = np.bincount(inverse)
    y = np.bincount(inverse, weights=logg) / counts
    x = np.log1p(shells)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return DecayFit(
        r=float(-2.0 * slope),
        residual=float(np.sqrt(np.mean(resid**2))),
        c_g=float(np.exp(intercept)),
    )


def sector_check(A_samples, phi: float):
    """Whether every sample lies in the closed sector |arg z| <= phi (z = 0 allowed).

    Accepts complex samples; this is the only place complex symbols are used.
    """
    z = np.asarray(A_samples)
    nonzero = np.abs(z) > 0
    args = np.abs(np.angle(z[nonzero])) if nonzero.any() else np.zeros(1)
    worst = float(args.max(initial=0.0))
    return worst <= phi, worst


@dataclass
class AdmissibilityReport:
    eta_nonzero: bool
    eta_min: float
    eta_at_zero: np.ndarray
    sector_ok: bool
    sector_max_arg: float
    derivative_bound: float
    derivative_order: int
    required_order: float
    derivative_label: str
    A_derivative_bound: float
    A_derivative_gamma: float
    g_positive: bool
    g_decay_fit: DecayFit | None
    g_decay_ge_2: bool
    failures: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return not self.failures

    def to_text(self) -> str:
        fit = self.g_decay_fit
        lines = [
            f"overall={'pass' if self.overall else 'fail'}",
            f"failures={','.join(self.failures) or 'none'}",
            f"eta_nonzero={self.eta_nonzero}",
            f"eta_min_nonzero_modes={self.eta_min:.17g}",
            "eta_at_zero=" + ",".join(f"{v:.17g}" for v in self.eta_at_zero),
            f"sector_ok={self.sector_ok}",
            f"sector_max_arg={self.sector_max_arg:.17g}",
            f"derivative_bound={self.derivative_bound:.17g}",
            f"derivative_order={self.derivative_order}",
            f"required_order={self.required_order:.17g}",
            f"derivative_label={self.derivative_label}",
            f"A_derivative_bound={self.A_derivative_bound:.17g}",
            f"A_derivative_gamma={self.A_derivative_gamma:.17g}",
            f"g_positive={self.g_positive}",
        ]
        if fit is not None:
            lines += [
                f"g_decay_r={fit.r:.17g}",
                f"g_decay_residual={fit.residual:.17g}",
                f"g_decay_c={fit.c_g:.17g}",
            ]
        lines.append(f"g_decay_ge_2={self.g_decay_ge_2}")
        lines += [f"note={n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def _multi_indices(n: int, order: int):
    for total in range(order + 1):
        for beta in itertools.product(range(total + 1), repeat=n):
            if sum(beta) == total:
                yield beta


def _lattice_derivative(values: np.ndarray, beta, step: float) -> np.ndarray:
    # central differences on the fftshift-sorted lattice
    out = np.fft.fftshift(values)
    for axis, times in enumerate(beta):
        for _ in range(times):
            out = np.gradient(out, step, axis=axis, edge_order=2)
    return np.fft.ifftshift(out)


def check_admissibility(
    table: SymbolTable,
    spec: KernelSpec | None = None,
    s: float = 2.0,
    phi: float = np.pi / 2,
    order: int | None = None,
    A_samples=None,
    gamma: float = 0.5,
) -> AdmissibilityReport:
    """Numerical audit of the symbol hypotheses. Never raises on failure.

    ``A_samples`` optionally replaces ``table.A_hat`` for the sector check
    (e.g. complex sectorial samples that the stepper cannot use).
    """
    grid = table.grid
    failures, notes = [], []
    nonzero = grid.xi2 > 0
    eta_nz = table.eta[:, nonzero]
    eta_min = float(eta_nz.min()) if eta_nz.size else 0.0
    eta_nonzero = eta_min > 0
    if not eta_nonzero:
        failures.append("eta_nonzero")
    eta_zero = table.eta[(slice(None),) + grid.zero_mode()].astype(float)
    if (eta_zero == 0).any():
        notes.append("eta vanishes at xi=0; zero mode handled by mean-zero projection")

    samples = table.A_hat if A_samples is None else A_samples
    sector_ok, worst_arg = sector_check(samples, phi)
    if not sector_ok:
        failures.append("sector")

    deriv_order = min(grid.n, 2 if order is None else int(order))
    required = 1.0 + grid.n / 2.0
    if grid.M < 16:
        failures.append("grid_resolution")
        deriv_bound = a_deriv = float("nan")
    else:
        step = np.pi / grid.L
        weight = (1.0 + grid.xi2) ** (-(s / 2.0 - 2.0))
        deriv_bound = 0.0
        a_deriv = 0.0
        for beta in _multi_indices(grid.n, deriv_order):
            da = _lattice_derivative(table.a_hat, beta, step)
            deriv_bound = max(deriv_bound, float(np.max(weight * np.abs(da))))
            for j in range(table.N):
                dA = _lattice_derivative(table.A_hat[j], beta, step)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.abs(dA[nonzero]) * table.eta[j][nonzero] ** (-gamma)
                if ratio.size and np.isfinite(ratio).all():
                    a_deriv = max(a_deriv, float(ratio.max()))
                elif ratio.size:
                    a_deriv = float("inf")
        if not np.isfinite(deriv_bound):
            failures.append("derivative_bound")
        if not np.isfinite(a_deriv):
            failures.append("A_derivative_bound")
    notes.append(
        f"derivative audit covers |beta|<={deriv_order}; order > {required:g} is reported, not certified"
    )

    g_positive = bool((table.g_hat > 0).all())
    fit = None
    if not g_positive:
        failures.append("g_positive")
    else:
        try:
            fit = fit_decay_exponent(table.g_hat, grid)
        except DegenerateFit as exc:
            notes.append(f"decay fit skipped: {exc}")
    ge2 = fit is not None and fit.r >= 2.0 - 1e-9
    return AdmissibilityReport(
        eta_nonzero=eta_nonzero,
        eta_min=eta_min,
        eta_at_zero=eta_zero,
        sector_ok=sector_ok,
        sector_max_arg=worst_arg,
        derivative_bound=deriv_bound,
        derivative_order=deriv_order,
        required_order=required,
        derivative_label="approximate",
        A_derivative_bound=a_deriv,
        A_derivative_gamma=gamma,
        g_positive=g_positive,
        g_decay_fit=fit,
        g_decay_ge_2=ge2,
        failures=failures,
        notes=notes,
    )


def symbol_rows(table: SymbolTable):
    """Rows ``(|xi|, a_hat, A_hat_1..N, g_hat, eta_1..N)`` in DFT order."""
    grid = table.grid
    cols = [grid.abs_xi.ravel(), table.a_hat.ravel()]
    cols += [table.A_hat[j].ravel() for j in range(table.N)]
    cols.append(table.g_hat.ravel())
    cols += [table.eta[j].ravel() for j in range(table.N)]
    header = ["abs_xi", "a_hat"] + [f"A_hat_{j + 1}" for j in range(table.N)]
    header += ["g_hat"] + [f"eta_{j + 1}" for j in range(table.N)]
    return header, np.column_stack(cols)
