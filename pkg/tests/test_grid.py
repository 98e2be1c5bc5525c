import numpy as np
import pytest

import solwave as sw
from solwave.errors import GridError


def test_roundtrip(grid48):
    rng = np.random.default_rng(0)
    f = rng.standard_normal(grid48.shape)
    back = grid48.to_physical_real(grid48.to_spectral(f))
    assert np.max(np.abs(back - f)) < 1e-12 * np.max(np.abs(f))


def test_forward_matches_continuum_gaussian(grid64):
    # fhat of exp(-r^2/2) is exp(-k^2/2) in the (2pi)^{-3/2} e^{ikx} convention
    X, Y, Z = grid64.xmesh()
    f = np.exp(-(X**2 + Y**2 + Z**2) / 2.0)
    fhat = grid64.to_spectral(f)
    exact = np.exp(-grid64.k2 / 2.0)
    assert np.max(np.abs(fhat - exact)) < 1e-10
    assert np.max(np.abs(fhat.imag)) < 1e-12


def test_derivative_convention(grid48):
    # d/dx of sin(k0 x) is k0 cos(k0 x); checks the -i k_j sign
    k0 = 2 * np.pi / grid48.box_length * 3
    X, _, _ = grid48.xmesh()
    f = np.sin(k0 * X)
    df = grid48.to_physical_real(grid48.deriv(grid48.to_spectral(f), 0))
    assert np.max(np.abs(df - k0 * np.cos(k0 * X))) < 1e-10 * k0


def test_shift_phase(grid48):
    X, Y, Z = grid48.xmesh()
    f = np.exp(-((X - 1.0) ** 2 + Y**2 + Z**2))
    g = np.exp(-(X**2 + Y**2 + Z**2))
    shifted = grid48.to_physical_real(
        grid48.to_spectral(g) * grid48.shift_phase([1.0, 0.0, 0.0])
    )
    assert np.max(np.abs(shifted - f)) < 1e-10


def test_parseval(grid48):
    rng = np.random.default_rng(1)
    f = rng.standard_normal(grid48.shape)
    g = rng.standard_normal(grid48.shape)
    direct = grid48.inner(f, g)
    spectral = grid48.inner_spectral(grid48.to_spectral(f), grid48.to_spectral(g))
    assert abs(direct - spectral) < 1e-10 * abs(direct)


def test_grid_validation():
    with pytest.raises(GridError):
        sw.Grid3(8, 4.0)
    with pytest.raises(GridError):
        sw.Grid3(33, 4.0)
    with pytest.raises(GridError):
        sw.Grid3(32, -1.0)


def test_zero_mode_unique(grid48):
    assert np.count_nonzero(grid48.k2 == 0.0) == 1
