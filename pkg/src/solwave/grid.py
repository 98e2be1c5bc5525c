"""Periodic 3-d grid and the discrete Fourier transform convention.

All spectral formulas in this package use the continuum convention

    fhat(k) = (2*pi)^(-3/2) * integral( exp(i k.x) f(x) dx ),

so the inverse carries exp(-i k.x) and a derivative d_j maps to
multiplication by -i*k_j.  The grid is the cube [-L/2, L/2)^3 sampled
at n points per axis, wavevectors k_m = 2*pi*m/L with m in [-n/2, n/2).
Because the spatial origin sits at sample index n/2, the forward/inverse
FFTs pick up the usual alternating parity sign, handled here once.
"""

from __future__ import annotations

import numpy as np

from .errors import GridError

TWO_PI = 2.0 * np.pi
FOURIER_PREF = (2.0 * np.pi) ** (-1.5)


class Grid3:
    """Cubic periodic grid with cached wavevector arrays.

    Parameters
    ----------
    n : points per axis (even, >= 16; powers of two give the fastest FFTs
        but any even n is accepted -- the production runs use n = 96).
    box_length : physical side L of the periodic cube.
    """

    def __init__(self, n: int, box_length: float):
        if n < 16:
            raise GridError(f"n={n} too small, need n >= 16")
        if n % 2 != 0:
            raise GridError(f"n={n} must be even (Nyquist bookkeeping)")
        if box_length <= 0:
            raise GridError(f"box_length={box_length} must be positive")
        self.n = int(n)
        self.box_length = float(box_length)
        self.h = self.box_length / self.n
        self.dk = TWO_PI / self.box_length
        self.k_nyquist = np.pi / self.h

        self.x1 = -self.box_length / 2 + self.h * np.arange(self.n)
        self.k1 = TWO_PI * np.fft.fftfreq(self.n, d=self.h)

        sign = 1.0 - 2.0 * (np.arange(self.n) % 2)
        # (-1)^(i+j+k), the phase of the origin offset -L/2 per axis
        self._parity = (
            sign[:, None, None] * sign[None, :, None] * sign[None, None, :]
        )
        self._fwd_scale = FOURIER_PREF * self.h**3 * self.n**3
        self._inv_scale = FOURIER_PREF * self.dk**3

        self.kx, self.ky, self.kz = np.meshgrid(
            self.k1, self.k1, self.k1, indexing="ij"
        )
        self.k2 = self.kx**2 + self.ky**2 + self.kz**2
        self.kabs = np.sqrt(self.k2)
        self._xmesh = None

    # -- coordinates ---------------------------------------------------

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    def xmesh(self):
        """Meshgrid of coordinates, cached (used by weights and moments)."""
        if self._xmesh is None:
            self._xmesh = np.meshgrid(self.x1, self.x1, self.x1, indexing="ij")
        return self._xmesh

    def radius(self, center=None):
        """|x - center| on the grid; center defaults to the box center 0."""
        X, Y, Z = self.xmesh()
        if center is None:
            return np.sqrt(X**2 + Y**2 + Z**2)
        return np.sqrt(
            (X - center[0]) ** 2 + (Y - center[1]) ** 2 + (Z - center[2]) ** 2
        )

    def same_as(self, other: "Grid3") -> bool:
        return self.n == other.n and self.box_length == other.box_length

    def require_same(self, other: "Grid3"):
        if not self.same_as(other):
            raise GridError(
                f"grid mismatch: ({self.n}, {self.box_length}) vs "
                f"({other.n}, {other.box_length})"
            )

    # -- transforms ----------------------------------------------------

    def to_spectral(self, f: np.ndarray) -> np.ndarray:
        """Forward transform, (2pi)^{-3/2} h^3 sum exp(+i k.x) f(x)."""
        return self._fwd_scale * self._parity * np.fft.ifftn(f)

    def to_physical(self, fhat: np.ndarray) -> np.ndarray:
        """Inverse transform (complex); real fields use to_physical_real."""
        return self._inv_scale * np.fft.fftn(self._parity * fhat)

    def to_physical_real(self, fhat: np.ndarray, tol: float = 1e-10) -> np.ndarray:
        out = self.to_physical(fhat)
        scale = np.max(np.abs(out))
        if scale > 0 and np.max(np.abs(out.imag)) > tol * scale:
            raise GridError(
                "inverse transform produced a non-real field "
                f"(imag/real = {np.max(np.abs(out.imag)) / scale:.2e})"
            )
        return out.real

    def to_physical_real_part(self, fhat: np.ndarray) -> np.ndarray:
        """Real part of the inverse transform, no Hermitian-symmetry guard.

        For difference fields built from single-precision snapshots the
        symmetric rounding noise can exceed the strict guard while the
        real part remains the correct projection.
        """
        return self.to_physical(fhat).real

    def shift_phase(self, b) -> np.ndarray:
        """exp(i k.b): multiplying fhat by this shifts the field to x -> x-b."""
        ex = np.exp(1j * self.k1 * b[0])
        ey = np.exp(1j * self.k1 * b[1])
        ez = np.exp(1j * self.k1 * b[2])
        return ex[:, None, None] * ey[None, :, None] * ez[None, None, :]

    def deriv(self, fhat: np.ndarray, axis: int) -> np.ndarray:
        """Spectral partial derivative: d_j f  <->  -i k_j fhat."""
        k = (self.kx, self.ky, self.kz)[axis]
        return -1j * k * fhat

    def kdotv(self, v) -> np.ndarray:
        return self.kx * v[0] + self.ky * v[1] + self.kz * v[2]

    # -- quadrature ----------------------------------------------------

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f)) * self.h**3

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """<f, g> = integral f g dx for real fields on this grid."""
        return float(np.sum(f * g)) * self.h**3

    def inner_spectral(self, fhat: np.ndarray, ghat: np.ndarray) -> float:
        """Parseval route for <f, g> of real fields: dk^3 Re sum fhat conj(ghat)."""
        return float(np.real(np.sum(fhat * np.conj(ghat)))) * self.dk**3

    def l2_norm_spectral(self, fhat: np.ndarray) -> float:
        return float(np.sqrt(np.sum(np.abs(fhat) ** 2) * self.dk**3))
