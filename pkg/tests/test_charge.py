import numpy as np
import pytest

import solwave as sw
from solwave.charge import spectral_density
from solwave.errors import ResolutionError


def test_zero_mode_exact(rho64):
    # sixth-order |k|^6 factor kills k=0 exactly, hence zero total charge
    assert rho64.rho_hat.flat[0] == 0.0
    assert sw.total_charge(rho64) == 0.0


def test_closed_form_transform(grid64, rho64):
    # discrete transform of the samples against the analytic profile
    fwd = grid64.to_spectral(rho64.samples)
    exact = rho64.rho_hat_profile(grid64.kabs)
    scale = np.max(np.abs(exact))
    assert np.max(np.abs(fwd - exact)) < 1e-6 * scale
    # strictly nonzero off k=0 on every sampled shell
    shells = np.linspace(grid64.dk, grid64.k_nyquist / 2, 40)
    assert np.all(np.abs(rho64.rho_hat_radial(shells)) > 0)


def test_wiener_pass(rho64):
    rep = rho64.wiener
    assert rep.passed
    assert rep.min_abs > rep.floor > 0


def test_wiener_counterexample(grid64):
    # rhohat2 = (|k|^2 - 1) Gaussian vanishes on the unit sphere
    bad = spectral_density(
        grid64, lambda k: (np.asarray(k) ** 2 - 1.0) * np.exp(-np.asarray(k) ** 2 / 2.0)
    )
    shells = np.linspace(0.2, 3.0, 57)  # contains |k| = 1 exactly
    rep = sw.check_wiener(bad, shells=shells)
    assert not rep.passed
    assert abs(np.linalg.norm(rep.worst_k) - 1.0) < 0.05
    assert rep.min_abs < 1e-14


def test_wiener_zero_density(grid64):
    zero = spectral_density(grid64, lambda k: np.zeros_like(np.asarray(k, dtype=float)))
    rep = sw.check_wiener(zero)
    assert not rep.passed
    assert rep.min_abs == 0.0


def test_wiener_empty_shells(rho64):
    with pytest.raises(ValueError):
        sw.check_wiener(rho64, shells=[])


def test_moments_admissible(rho64):
    rep = sw.check_moments(rho64, 4)
    assert rep.passed
    assert rep.worst_rel < 1e-8


def test_moments_raw_gaussian_fails(grid64):
    # positive integrand: order zero cannot vanish
    raw = spectral_density(grid64, lambda k: np.exp(-np.asarray(k) ** 2 / 2.0))
    rep = sw.check_moments(raw, 0)
    assert not rep.passed
    assert abs(rep.moments[(0, 0, 0)]) > 0.1 * rep.l1_norm


def test_odd_moments_near_roundoff(rho64):
    rep = sw.check_moments(rho64, 3)
    odd = [m for a, m in rep.moments.items() if sum(a) % 2 == 1]
    assert max(abs(m) for m in odd) < 1e-8 * rep.l1_norm


def test_radiality(grid64, rho64):
    # rhohat depends on |k| only: compare equal-|k| orbits
    kk = np.round(grid64.kabs, 9).ravel()
    vals = np.real(rho64.rho_hat).ravel()
    order = np.argsort(kk)
    kk, vals = kk[order], vals[order]
    _, start = np.unique(kk, return_index=True)
    scale = np.max(np.abs(vals))
    worst = 0.0
    for a, b in zip(start[:-1], start[1:]):
        if b - a > 1:
            worst = max(worst, np.ptp(vals[a:b]))
    assert worst < 1e-10 * scale


def _spectral_derivative_estimates(rho, grid):
    """Divided-difference estimates of d^2, d^4 of rhohat at k = 0.

    A sixth-order zero leaves O(dk^4) and O(dk^2) truncation floors in the
    second and fourth differences; a density with nonzero low moments
    produces O(1) values instead.
    """
    prof = rho.rho_hat_radial
    dk = grid.dk
    f = lambda m: float(np.real(np.atleast_1d(prof(abs(m) * dk))[0]))
    second = (f(1) - 2 * f(0) + f(1)) / dk**2
    fourth = (f(2) - 4 * f(1) + 6 * f(0) - 4 * f(1) + f(2)) / dk**4
    return abs(second), abs(fourth)


def test_moment_spectral_equivalence(grid64, rho64):
    """(1.7) <-> (1.8) discretely: flat-spectrum estimates and grid moments
    are small together for the admissible density and large together for a
    raw Gaussian, under matched relative tolerances."""
    scale = np.max(np.abs(rho64.rho_hat))
    d2, d4 = _spectral_derivative_estimates(rho64, grid64)
    # truncation floors of a |k|^6 zero at this dk
    assert d2 < 10.0 * scale * grid64.dk**4
    assert d4 < 10.0 * scale * grid64.dk**2
    assert rho64.moments.passed

    raw = spectral_density(grid64, lambda k: np.exp(-np.asarray(k) ** 2 / 2.0))
    r2, r4 = _spectral_derivative_estimates(raw, grid64)
    raw_scale = np.max(np.abs(raw.rho_hat))
    assert r2 > 0.1 * raw_scale  # O(1) second derivative
    assert not sw.check_moments(raw, 2).passed


def test_preconditions(grid64):
    with pytest.raises(ValueError):
        sw.make_admissible_density(3.0, 1.0, grid64)  # base_width >= L/8
    with pytest.raises(ResolutionError):
        sw.make_admissible_density(0.3, 1.0, grid64)  # h > w/4


def test_box_clip_error():
    grid = sw.Grid3(64, 8.0)
    with pytest.raises(ResolutionError):
        # support radius ~5.4 w exceeds L/2 at the 1e-3 level
        sw.make_admissible_density(0.99, 1.0, grid)


def test_amplitude_normalization(rho64):
    assert abs(np.max(np.abs(rho64.samples)) - 0.25) < 1e-10
