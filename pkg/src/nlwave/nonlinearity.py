"""Power nonlinearity ``f(u) = lam * |w|^gamma * w`` with ``w = C u``.

``C`` is the optional component coupling matrix (identity by default). The
potential ``F`` satisfies ``F' = f`` and ``F(0) = 0``; with the identity
coupling, ``F(u) = lam |u|^(gamma+2) / (gamma+2)`` per component.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Overflow, ValidationError
from .spectral import Grid, forward_transform, grid_inner, sobolev_norm

OVERFLOW_GUARD = 1e100


@dataclass(frozen=True)
class NonlinearitySpec:
    lam: float = 0.0
    gamma: int = 1
    coupling: tuple | None = None
    form: str = "power"

    def __post_init__(self):
        if self.form != "power":
            raise ValidationError("nonlinearity.form", "only 'power' is supported")
        if int(self.gamma) != self.gamma or self.gamma < 1:
            raise ValidationError("nonlinearity.gamma", "must be an integer >= 1")
        if not np.isfinite(self.lam):
            raise ValidationError("nonlinearity.lambda", "must be finite")
        if self.coupling is not None:
            mat = np.asarray(self.coupling, dtype=float)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValidationError("nonlinearity.coupling_matrix", "must be square")
            if not np.isfinite(mat).all():
                raise ValidationError("nonlinearity.coupling_matrix", "entries must be finite")
            object.__setattr__(self, "coupling", tuple(map(tuple, mat.tolist())))

    @property
    def is_linear(self) -> bool:
        return self.lam == 0.0

    def coupling_matrix(self, N: int) -> np.ndarray:
        if self.coupling is None:
            return np.eye(N)
        mat = np.asarray(self.coupling, dtype=float)
        if mat.shape != (N, N):
            raise ValidationError(
                "nonlinearity.coupling_matrix", f"shape {mat.shape} does not match N={N}"
            )
        return mat


def _guard(u: np.ndarray) -> None:
    if not np.isfinite(u).all() or np.abs(u).max(initial=0.0) > OVERFLOW_GUARD:
        raise Overflow(f"|u| exceeds {OVERFLOW_GUARD:g}")


def _mixed(u: np.ndarray, spec: NonlinearitySpec) -> np.ndarray:
    if spec.coupling is None:
        return u
    mat = spec.coupling_matrix(u.shape[0])
    return np.tensordot(mat, u, axes=(1, 0))


def f_eval(u: np.ndarray, spec: NonlinearitySpec) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    _guard(u)
    if spec.is_linear:
        return np.zeros_like(u)
    w = _mixed(u, spec)
    return spec.lam * np.abs(w) ** spec.gamma * w


def potential_density(u: np.ndarray, spec: NonlinearitySpec) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    _guard(u)
    w = _mixed(u, spec)
    p = spec.gamma + 2
    return spec.lam * np.abs(w) ** p / p


def potential_eval(u: np.ndarray, spec: NonlinearitySpec, grid: Grid) -> float:
    """Grid quadrature of ``F(u)`` summed over components."""
    if spec.is_linear:
        return 0.0
    return float(np.sum(potential_density(u, spec)) * grid.cell_volume)


def interaction(u: np.ndarray, spec: NonlinearitySpec, grid: Grid) -> float:
    """``(f(u), u)`` as a grid quadrature."""
    if spec.is_linear:
        return 0.0
    return grid_inner(f_eval(u, spec), u, grid)


@dataclass
class LipschitzReport:
    s: float
    ratio_difference: float
    ratio_self: float
    sup_bound: float


def lipschitz_audit(u, v, spec: NonlinearitySpec, s: float, table) -> LipschitzReport:
    """Empirical ratios ``|f(u)-f(v)|_s / |u-v|_s`` and ``|f(u)|_s / |u|_s``.

    Norms are H^s norms computed spectrally; ``sup_bound`` is
    ``max(|u|_inf, |v|_inf)``. No pass/fail is attached.
    """
    grid = table.grid
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.array_equal(u, v):
        raise ValueError("lipschitz_audit needs u != v")

    def norm(field):
        return sobolev_norm(forward_transform(field, grid), grid, s)

    fu = f_eval(u, spec)
    diff = norm(fu - f_eval(v, spec)) / norm(u - v)
    nu = norm(u)
    ratio_self = norm(fu) / nu if nu > 0 else 0.0
    sup = float(max(np.abs(u).max(), np.abs(v).max()))
    return LipschitzReport(s=s, ratio_difference=diff, ratio_self=ratio_self, sup_bound=sup)


def lipschitz_sweep(spec: NonlinearitySpec, table, s: float = 0.0, sup_bound: float = 1.0,
                    pairs: int = 100, seed: int = 0, modes: int = 4):
    """Randomized audit over smooth random pairs with sup-norm <= ``sup_bound``.

    Returns the per-pair reports; ``max(r.ratio_difference / r.sup_bound**gamma)``
    is the fitted constant for the Lipschitz estimate.
    """
    rng = np.random.default_rng(seed)
    grid = table.grid
    N = table.N
    out = []
    while len(out) < pairs:
        fields = []
        for _ in range(2):
            coeffs = np.zeros(grid.field_shape(N), dtype=complex)
            for idx in np.ndindex(*([modes] * grid.n)):
                sl = (slice(None),) + idx
                coeffs[sl] = rng.normal(size=N) + 1j * rng.normal(size=N)
            field_ = np.real(np.fft.ifftn(coeffs, axes=tuple(range(1, grid.n + 1))))
            peak = np.abs(field_).max()
            fields.append(field_ * (sup_bound * rng.uniform(0.1, 1.0) / peak))
        if np.array_equal(fields[0], fields[1]):
            continue
        out.append(lipschitz_audit(fields[0], fields[1], spec, s, table))
    return out
