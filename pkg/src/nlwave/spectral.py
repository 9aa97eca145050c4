"""Periodic grids, the normalized DFT pair and RealField snapshot files.

Fields live on the periodic box ``[-L, L)^n`` sampled with ``M`` points per
axis. A field with ``N`` components is stored as a real array of shape
``(N,) + (M,) * n``; its spectrum has the same shape and complex dtype, in
standard DFT ordering along every spatial axis.

Normalization
-------------
``forward_transform`` returns ``h**(n/2) * fftn(u, norm="ortho")`` where
``h = 2L/M`` is the grid spacing. With this choice Parseval reads::

    sum_x |u(x)|^2 h^n == sum_xi |u_hat(xi)|^2

so the plain sum of squared coefficients is the grid quadrature of the L2
norm on the box. Every norm and energy in the package relies on this.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InvalidGrid, NotRealizable, ShapeMismatch, SnapshotFormatError

REALIZABLE_RTOL = 1e-10

SNAPSHOT_MAGIC = b"NLWV"
SNAPSHOT_VERSION = 1
CHECKPOINT_VERSION = 2
# magic, version, n, M, N, reserved, L
_HEADER = struct.Struct("<4sIIIIId")
_T_EXT = struct.Struct("<d")
assert _HEADER.size == 32


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)^n`` with ``M`` points per axis."""

    n: int
    L: float
    M: int
    wavenumbers: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        k = np.fft.fftfreq(self.M, d=1.0 / self.M)
        axis = (np.pi / self.L) * k
        axis.setflags(write=False)
        object.__setattr__(self, "wavenumbers", tuple(axis for _ in range(self.n)))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.M

    @property
    def shape(self) -> tuple:
        return (self.M,) * self.n

    @property
    def num_modes(self) -> int:
        return self.M**self.n

    @property
    def measure(self) -> float:
        """Volume of the periodic box."""
        return (2.0 * self.L) ** self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @cached_property
    def xi(self) -> tuple:
        """Wavenumber components broadcast to the full mode lattice."""
        return tuple(np.meshgrid(*self.wavenumbers, indexing="ij"))

    @cached_property
    def xi2(self) -> np.ndarray:
        """|xi|^2 on the mode lattice."""
        out = np.zeros(self.shape)
        for comp in self.xi:
            out = out + comp * comp
        return out

    @cached_property
    def abs_xi(self) -> np.ndarray:
        return np.sqrt(self.xi2)

    @cached_property
    def coords(self) -> tuple:
        """Physical sample coordinates, one array per axis, broadcast to the grid."""
        axis = -self.L + self.h * np.arange(self.M)
        return tuple(np.meshgrid(*([axis] * self.n), indexing="ij"))

    @property
    def max_abs_xi(self) -> float:
        return float(self.abs_xi.max())

    def field_shape(self, N: int) -> tuple:
        return (N,) + self.shape

    def zero_mode(self) -> tuple:
        """Index of the xi = 0 coefficient (per component)."""
        return (0,) * self.n


def make_grid(n: int, L: float, M: int) -> Grid:
    """Build a periodic grid, validating the dimension, half-period and size."""
    if n not in (1, 2):
        raise InvalidGrid(f"unsupported dimension n={n}; expected 1 or 2")
    if not np.isfinite(L) or L <= 0:
        raise InvalidGrid(f"half-period L must be positive, got {L}")
    if int(M) != M or M < 4 or M % 2:
        raise InvalidGrid(f"points per axis M must be an even integer >= 4, got {M}")
    return Grid(n=int(n), L=float(L), M=int(M))


def _check_shape(arr: np.ndarray, grid: Grid) -> None:
    if arr.ndim != grid.n + 1 or arr.shape[1:] != grid.shape:
        raise ShapeMismatch(
            f"expected shape (N,)+{grid.shape}, got {arr.shape}"
        )


def _axes(grid: Grid) -> tuple:
    return tuple(range(1, grid.n + 1))


def forward_transform(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Normalized DFT of every component of a real field."""
    field = np.asarray(field, dtype=float)
    _check_shape(field, grid)
    scale = grid.h ** (grid.n / 2)
    return scale * np.fft.fftn(field, axes=_axes(grid), norm="ortho")


def inverse_transform(spec: np.ndarray, grid: Grid) -> np.ndarray:
    """Inverse of :func:`forward_transform`.

    The imaginary residue is dropped when it stays below ``REALIZABLE_RTOL``
    relative to the largest real sample; otherwise :class:`NotRealizable`.
    """
    spec = np.asarray(spec)
    _check_shape(spec, grid)
    scale = grid.h ** (-grid.n / 2)
    z = scale * np.fft.ifftn(spec, axes=_axes(grid), norm="ortho")
    imag = np.abs(z.imag).max(initial=0.0)
    ref = np.abs(z).max(initial=0.0)
    if imag > REALIZABLE_RTOL * ref:
        raise NotRealizable(
            f"imaginary residue {imag:.3e} exceeds {REALIZABLE_RTOL:g} x {ref:.3e}"
        )
    return np.ascontiguousarray(z.real)


def conjugate_asymmetry(spec: np.ndarray, grid: Grid) -> float:
    """Relative departure of ``spec`` from coeff(-k) = conj(coeff(k))."""
    spec = np.asarray(spec)
    _check_shape(spec, grid)
    flipped = spec
    for ax in _axes(grid):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    ref = np.abs(spec).max(initial=0.0)
    if ref == 0.0:
        return 0.0
    return float(np.abs(spec - np.conj(flipped)).max() / ref)


def l2_norm(spec: np.ndarray) -> float:
    """L2 norm over all components, via Parseval."""
    return float(np.sqrt(np.sum(np.abs(spec) ** 2)))


def sobolev_norm(spec: np.ndarray, grid: Grid, s: float) -> float:
    """H^s norm ``(sum (1+|xi|^2)^s |u_hat|^2)^(1/2)`` summed over components."""
    weight = (1.0 + grid.xi2) ** s
    return float(np.sqrt(np.sum(weight * np.abs(spec) ** 2)))


def grid_inner(u: np.ndarray, v: np.ndarray, grid: Grid) -> float:
    """Quadrature of sum_j u_j v_j over the box."""
    return float(np.sum(u * v) * grid.cell_volume)


# -- snapshot files -----------------------------------------------------------


def _pack_header(grid: Grid, N: int, version: int) -> bytes:
    return _HEADER.pack(SNAPSHOT_MAGIC, version, grid.n, grid.M, N, 0, grid.L)


def write_snapshot(path, field: np.ndarray, grid: Grid) -> None:
    """Write a RealField as 32-byte header + little-endian float64 samples."""
    field = np.asarray(field, dtype=float)
    _check_shape(field, grid)
    with open(path, "wb") as fh:
        fh.write(_pack_header(grid, field.shape[0], SNAPSHOT_VERSION))
        fh.write(field.astype("<f8").tobytes(order="C"))


def write_checkpoint(path, u: np.ndarray, ut: np.ndarray, t: float, grid: Grid) -> None:
    """Write (u, u_t) with the time stored in an 8-byte header extension."""
    u = np.asarray(u, dtype=float)
    ut = np.asarray(ut, dtype=float)
    _check_shape(u, grid)
    if ut.shape != u.shape:
        raise ShapeMismatch(f"u_t shape {ut.shape} differs from u shape {u.shape}")
    with open(path, "wb") as fh:
        fh.write(_pack_header(grid, u.shape[0], CHECKPOINT_VERSION))
        fh.write(_T_EXT.pack(float(t)))
        fh.write(u.astype("<f8").tobytes(order="C"))
        fh.write(ut.astype("<f8").tobytes(order="C"))


def _read_header(buf: bytes):
    if len(buf) < _HEADER.size:
        raise SnapshotFormatError("file shorter than the 32-byte header")
    magic, version, n, M, N, _, L = _HEADER.unpack_from(buf)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    return version, n, M, N, L


def read_snapshot(path):
    """Read a version-1 snapshot; returns ``(field, grid)``."""
    buf = Path(path).read_bytes()
    version, n, M, N, L = _read_header(buf)
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"expected snapshot version 1, got {version}")
    grid = make_grid(n, L, M)
    count = N * grid.num_modes
    if len(buf) != _HEADER.size + 8 * count:
        raise SnapshotFormatError("payload size does not match header")
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=_HEADER.size)
    return data.reshape(grid.field_shape(N)).astype(float), grid


def read_checkpoint(path):
    """Read a version-2 checkpoint; returns ``(u, u_t, t, grid)``."""
    buf = Path(path).read_bytes()
    version, n, M, N, L = _read_header(buf)
    if version != CHECKPOINT_VERSION:
        raise SnapshotFormatError(f"expected checkpoint version 2, got {version}")
    grid = make_grid(n, L, M)
    count = N * grid.num_modes
    offset = _HEADER.size + _T_EXT.size
    if len(buf) != offset + 16 * count:
        raise SnapshotFormatError("payload size does not match header")
    (t,) = _T_EXT.unpack_from(buf, _HEADER.size)
    data = np.frombuffer(buf, dtype="<f8", count=2 * count, offset=offset).astype(float)
    shape = grid.field_shape(N)
    return data[:count].reshape(shape), data[count:].reshape(shape), t, grid
