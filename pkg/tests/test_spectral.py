import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlwave.errors import InvalidGrid, NotRealizable, ShapeMismatch, SnapshotFormatError
from nlwave.spectral import (
    conjugate_asymmetry,
    forward_transform,
    inverse_transform,
    l2_norm,
    make_grid,
    read_checkpoint,
    read_snapshot,
    write_checkpoint,
    write_snapshot,
)


def test_unit_wavenumbers_in_dft_order():
    grid = make_grid(1, np.pi, 4)
    np.testing.assert_array_equal(grid.wavenumbers[0], [0.0, 1.0, -2.0, -1.0])


def test_max_wavenumber():
    grid = make_grid(1, 1.0, 8)
    assert grid.max_abs_xi == pytest.approx(4 * np.pi, rel=1e-15)


def test_2d_lattice_matches_enumeration():
    grid = make_grid(2, np.pi, 4)
    assert grid.num_modes == 16
    expected = sorted(kx * kx + ky * ky for kx, ky in itertools.product([-2, -1, 0, 1], repeat=2))
    assert sorted(grid.xi2.ravel().tolist()) == expected
    assert grid.max_abs_xi == pytest.approx(2 * np.sqrt(2), rel=1e-15)


@pytest.mark.parametrize("args", [(1, np.pi, 7), (1, 0.0, 8), (1, -1.0, 8), (3, 1.0, 8), (1, 1.0, 2)])
def test_invalid_grids(args):
    with pytest.raises(InvalidGrid):
        make_grid(*args)


@pytest.mark.parametrize("n,L,M", [(1, 2.0, 16), (2, 1.5, 8)])
def test_grid_invariants(n, L, M):
    grid = make_grid(n, L, M)
    assert grid.h > 0
    assert grid.max_abs_xi <= (np.pi / L) * (M / 2) * np.sqrt(n) * (1 + 1e-15)


def test_constant_field_has_only_zero_mode():
    grid = make_grid(1, np.pi, 16)
    spec = forward_transform(np.full((1, 16), 2.5), grid)
    assert abs(spec[0, 0]) > 0
    assert np.abs(spec[0, 1:]).max() < 1e-14


def test_cosine_matches_direct_dft_sum():
    grid = make_grid(1, np.pi, 8)
    u = np.cos(grid.coords[0])
    spec = forward_transform(u[None], grid)[0]
    # independent oracle: explicit DFT sum with the documented normalization
    M, h = grid.M, grid.h
    j = np.arange(M)
    direct = np.array([np.sum(u * np.exp(-2j * np.pi * k * j / M)) for k in range(M)])
    direct *= np.sqrt(h) / np.sqrt(M)
    np.testing.assert_allclose(spec, direct, atol=1e-14)
    assert spec[1] == pytest.approx(spec[-1], abs=1e-14)
    others = np.delete(np.abs(spec), [1, M - 1])
    assert others.max() < 1e-14


def test_inverse_of_cosine_spectrum():
    grid = make_grid(1, np.pi, 8)
    u = np.cos(grid.coords[0])[None]
    back = inverse_transform(forward_transform(u, grid), grid)
    np.testing.assert_allclose(back, u, rtol=0, atol=1e-13)


def test_zero_and_constant_spectra():
    grid = make_grid(1, np.pi, 8)
    spec = np.zeros((1, 8), dtype=complex)
    np.testing.assert_array_equal(inverse_transform(spec, grid), 0.0)
    spec[0, 0] = 3.0
    u = inverse_transform(spec, grid)
    np.testing.assert_allclose(u, u[0, 0], rtol=1e-15)


def test_not_realizable():
    grid = make_grid(1, np.pi, 8)
    spec = np.zeros((1, 8), dtype=complex)
    spec[0, 1] = 1.0
    with pytest.raises(NotRealizable):
        inverse_transform(spec, grid)


def test_shape_mismatch():
    grid = make_grid(1, np.pi, 8)
    with pytest.raises(ShapeMismatch):
        forward_transform(np.zeros(8), grid)
    with pytest.raises(ShapeMismatch):
        forward_transform(np.zeros((1, 16)), grid)


fields = st.tuples(st.sampled_from([(1, 8), (1, 16), (2, 8)]), st.integers(1, 3), st.integers(0, 2**32 - 1))


@settings(max_examples=30, deadline=None)
@given(fields)
def test_roundtrip_parseval_linearity(params):
    (n, M), N, seed = params
    grid = make_grid(n, 1.3, M)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=grid.field_shape(N))
    g = rng.normal(size=grid.field_shape(N))
    F = forward_transform(f, grid)
    back = inverse_transform(F, grid)
    assert np.abs(back - f).max() <= 1e-12 * np.abs(f).max()
    quad = np.sqrt(np.sum(f**2) * grid.cell_volume)
    assert l2_norm(F) == pytest.approx(quad, rel=1e-12)
    assert conjugate_asymmetry(F, grid) < 1e-12
    a, b = rng.normal(size=2)
    lhs = forward_transform(a * f + b * g, grid)
    rhs = a * F + b * forward_transform(g, grid)
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max()


def test_snapshot_roundtrip_is_bit_exact(tmp_path, rng):
    grid = make_grid(2, 0.75, 8)
    f = rng.normal(size=grid.field_shape(3))
    path = tmp_path / "s.bin"
    write_snapshot(path, f, grid)
    raw = path.read_bytes()
    assert raw[:4] == b"NLWV"
    assert len(raw) == 32 + 8 * f.size
    assert int.from_bytes(raw[4:8], "little") == 1
    back, g2 = read_snapshot(path)
    assert g2 == grid
    assert back.tobytes() == f.tobytes()


def test_checkpoint_roundtrip(tmp_path, rng):
    grid = make_grid(1, 2.0, 16)
    u, ut = rng.normal(size=(2, 2, 16))
    path = tmp_path / "c.bin"
    write_checkpoint(path, u, ut, 1.25, grid)
    u2, ut2, t, g2 = read_checkpoint(path)
    assert t == 1.25 and g2 == grid
    assert u2.tobytes() == u.tobytes() and ut2.tobytes() == ut.tobytes()


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"XXXX" + bytes(28))
    with pytest.raises(SnapshotFormatError):
        read_snapshot(path)
