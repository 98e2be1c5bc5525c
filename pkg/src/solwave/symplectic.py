"""Symplectic form, frame Gram matrix, and projection onto the manifold.

The bilinear form on states Y = (psi, pi, q, p) is

    Omega(Y1, Y2) = <psi1, pi2> - <pi1, psi2> + q1.p2 - p1.q2,

antisymmetric by construction.  The projection Pi sends a state near the
solitary manifold to the soliton S(sigma) whose residue Z = Y - S(sigma)
is Omega-orthogonal to the tangent frame; sigma solves the six equations
Omega(Y - S(sigma), tau_j(sigma)) = 0 by a Newton iteration.

The Newton path works entirely on the spectral support of the charge:
every tangent-field spectrum carries a factor rhohat, so inner products
against the frame are exact when restricted to modes where rhohat is
non-negligible.  That makes a residual evaluation O(mask) instead of
O(n^3) and keeps per-snapshot projections cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charge import ChargeDensity
from .errors import BasinError, DegeneracyError, DomainError, GridError
from .grid import Grid3
from .soliton import (
    FieldPair,
    LinState,
    PhaseState,
    SolitonParams,
    TangentFrame,
    bv_inverse,
    soliton_state,
)

DEFAULT_PROJECTION_TOL = 1e-10
DEFAULT_MAX_ITERS = 50
DEFAULT_V_CAP = 0.95
JACOBIAN_STEP = 1e-5
DEGENERACY_FLOOR = 1e-12
ANTISYMMETRY_TOL = 1e-10


def symplectic_form(y1, y2) -> float:
    """Omega(Y1, Y2) by grid quadrature; operands are Phase- or LinStates."""
    g = y1.grid
    if not g.same_as(y2.grid):
        raise GridError("symplectic_form operands live on different grids")
    f1, f2 = y1.fields, y2.fields
    val = g.inner(f1.psi, f2.pi) - g.inner(f1.pi, f2.psi)
    q1, p1 = _vec_parts(y1)
    q2, p2 = _vec_parts(y2)
    return val + float(q1 @ p2 - p1 @ q2)


def _vec_parts(y):
    if isinstance(y, PhaseState):
        return y.q, y.p
    return y.Q, y.P


@dataclass
class OmegaMatrix:
    """Gram matrix Omega(tau_l, tau_j) of a tangent frame; entries[l, j]."""

    v: np.ndarray
    entries: np.ndarray
    det: float

    def solve(self, w: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.entries, w)


def omega_matrix(frame: TangentFrame) -> OmegaMatrix:
    entries = np.zeros((6, 6))
    for l in range(6):
        for j in range(l + 1, 6):
            entries[l, j] = symplectic_form(frame[l], frame[j])
            entries[j, l] = -entries[l, j]
    # independent antisymmetry audit on a recomputed lower triangle
    worst = 0.0
    for l in range(1, 6):
        for j in range(l):
            worst = max(
                worst, abs(symplectic_form(frame[l], frame[j]) - entries[l, j])
            )
    scale = max(np.max(np.abs(entries)), 1e-300)
    if worst > ANTISYMMETRY_TOL * scale:
        raise DegeneracyError(f"Omega(v) not antisymmetric: {worst / scale:.2e}")
    det = float(np.linalg.det(entries))
    if abs(det) < DEGENERACY_FLOOR * scale**6:
        raise DegeneracyError(f"Omega(v) degenerate: det={det:.3e}")
    return OmegaMatrix(v=frame.v.copy(), entries=entries, det=det)


def project_transversal(z: LinState, frame: TangentFrame, omega: OmegaMatrix) -> LinState:
    """P_v Z = Z - sum_j c_j tau_j with Omega(P_v Z, tau_j) = 0 for all j.

    The coefficients solve G c = w where G[l, j] = Omega(tau_l, tau_j) and
    w_l = Omega(tau_l, Z); the paper leaves the coefficient matrix of its
    projector implicit, so the linear system is the defining convention.
    """
    w = np.array([symplectic_form(frame[l], z) for l in range(6)])
    c = omega.solve(w)
    grid = z.grid
    psi = z.fields.psi.copy()
    pi = z.fields.pi.copy()
    Q = z.Q.copy()
    P = z.P.copy()
    for j in range(6):
        psi -= c[j] * frame[j].fields.psi
        pi -= c[j] * frame[j].fields.pi
        Q -= c[j] * frame[j].Q
        P -= c[j] * frame[j].P
    return LinState(FieldPair(grid, psi, pi), Q, P)


@dataclass
class ProjectionResult:
    """Outcome of the symplectic projection at one state."""

    sigma: SolitonParams
    transversal: LinState  # Z = Y - S(sigma), lab-frame fields
    newton_iters: int
    residual: float  # max_j |Omega(Z, tau_j)| / ||Y||_E

    def transversal_moving_frame(self) -> LinState:
        """Z with fields shifted to the soliton frame y = x - b."""
        grid = self.transversal.grid
        ph = grid.shift_phase(-self.sigma.b)
        fields = FieldPair.from_spectral(
            grid,
            self.transversal.fields.psi_hat * ph,
            self.transversal.fields.pi_hat * ph,
            strict=False,
        )
        return LinState(fields, self.transversal.Q.copy(), self.transversal.P.copy())


class _MaskedWorkspace:
    """Frame/soliton spectra on the charge's spectral support."""

    def __init__(self, rho: ChargeDensity, grid: Grid3):
        mask = rho.support_mask()
        self.mask = mask
        self.kx = grid.kx[mask]
        self.ky = grid.ky[mask]
        self.kz = grid.kz[mask]
        self.k2 = grid.k2[mask]
        self.rh = rho.rho_hat[mask]
        self.dk3 = grid.dk**3

    def kdotv(self, v):
        return self.kx * v[0] + self.ky * v[1] + self.kz * v[2]

    def phase(self, b):
        return np.exp(1j * (self.kx * b[0] + self.ky * b[1] + self.kz * b[2]))

    def residual(self, sigma_vec, psi_y, pi_y, q, p):
        """g_j = Omega(Y - S(sigma), tau_j(sigma)) on the masked modes."""
        b, v = sigma_vec[:3], sigma_vec[3:]
        v2 = v @ v
        if v2 >= 1.0:
            raise DomainError("projection wandered to |v| >= 1")
        kv = self.kdotv(v)
        d0 = self.k2 - kv * kv
        ph = self.phase(b)
        psi_s = -(self.rh / d0) * ph
        pi_s = 1j * kv * psi_s
        dpsi = psi_y - psi_s
        dpi = pi_y - pi_s
        rr = (self.rh / (d0 * d0)) * ph
        gam = 1.0 / np.sqrt(1.0 - v2)
        binv = gam * (np.eye(3) + gam * gam * np.outer(v, v))
        pv = gam * v
        dq = q - b
        dp = p - pv

        g = np.zeros(6)
        kvec = (self.kx, self.ky, self.kz)
        for j in range(3):
            # tau_j fields: (i k_j psi_s, i k_j pi_s); vectors (e_j, 0)
            tpsi = 1j * kvec[j] * psi_s
            tpi = 1j * kvec[j] * pi_s
            field = self.dk3 * np.real(
                np.sum(dpsi * np.conj(tpi)) - np.sum(dpi * np.conj(tpsi))
            )
            g[j] = field - dp[j]
            # tau_{3+j} fields; vectors (0, Binv e_j)
            tpsi = -2.0 * kv * kvec[j] * rr
            tpi = -1j * kvec[j] * (self.k2 + kv * kv) * rr
            field = self.dk3 * np.real(
                np.sum(dpsi * np.conj(tpi)) - np.sum(dpi * np.conj(tpsi))
            )
            g[3 + j] = field + float(dq @ binv[:, j])
        return g


def project_to_manifold(
    y: PhaseState,
    sigma_guess: SolitonParams,
    rho: ChargeDensity,
    *,
    projection_tol: float = DEFAULT_PROJECTION_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    v_cap: float = DEFAULT_V_CAP,
) -> ProjectionResult:
    """Solve Omega(Y - S(sigma), tau_j(sigma)) = 0 for sigma by Newton.

    The Jacobian is formed by central differences in sigma (step 1e-5) on
    the first iteration and reused until the residual stops contracting.
    """
    grid = y.grid
    grid.require_same(rho.grid)
    if np.linalg.norm(sigma_guess.v) >= v_cap:
        raise DomainError(f"|v| of the initial guess exceeds v_cap={v_cap}")

    ws = _MaskedWorkspace(rho, grid)
    psi_y = y.fields.psi_hat[ws.mask]
    pi_y = y.fields.pi_hat[ws.mask]
    scale = max(y.e_norm(), 1.0)

    sig = sigma_guess.as_vector().copy()
    g = ws.residual(sig, psi_y, pi_y, y.q, y.p)
    res = np.max(np.abs(g)) / scale
    jac = None
    iters = 0
    while res > projection_tol and iters < max_iters:
        if jac is None:
            jac = np.zeros((6, 6))
            for l in range(6):
                e = np.zeros(6)
                e[l] = JACOBIAN_STEP
                gp = ws.residual(sig + e, psi_y, pi_y, y.q, y.p)
                gm = ws.residual(sig - e, psi_y, pi_y, y.q, y.p)
                jac[:, l] = (gp - gm) / (2.0 * JACOBIAN_STEP)
        try:
            delta = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError as exc:
            raise DegeneracyError("projection Jacobian singular") from exc
        sig = sig + delta
        vmag = np.linalg.norm(sig[3:])
        if vmag >= v_cap:
            raise DomainError(
                f"projection reached |v|={vmag:.3f} >= v_cap={v_cap}"
            )
        g_new = ws.residual(sig, psi_y, pi_y, y.q, y.p)
        res_new = np.max(np.abs(g_new)) / scale
        if res_new > 0.5 * res:
            jac = None  # contraction stalled: refresh the Jacobian
        g, res = g_new, res_new
        iters += 1
    if res > projection_tol:
        raise BasinError(
            f"projection did not converge: residual {res:.3e} after"
            f" {iters} iterations"
        )

    sigma = SolitonParams.from_vector(sig)
    s_state = soliton_state(rho, sigma, grid)
    z = LinState(
        FieldPair(
            grid,
            y.fields.psi - s_state.fields.psi,
            y.fields.pi - s_state.fields.pi,
        ),
        y.q - sigma.b,
        y.p - sigma.p_v,
    )
    return ProjectionResult(sigma=sigma, transversal=z, newton_iters=iters, residual=res)


def decompose(z: LinState, frame: TangentFrame, omega: OmegaMatrix):
    """Split Z into the tangential part and the transversal remainder.

    Returns (coeffs, transversal) with Z = sum_j coeffs[j] tau_j + P_v Z.
    """
    w = np.array([symplectic_form(frame[l], z) for l in range(6)])
    c = omega.solve(w)
    p = project_transversal(z, frame, omega)
    return c, p
