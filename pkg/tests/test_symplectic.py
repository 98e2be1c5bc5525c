import numpy as np
import pytest

import solwave as sw
from conftest import smooth_linstate, smooth_state
from solwave.errors import BasinError, DomainError

V03 = np.array([0.3, 0.0, 0.0])


def test_antisymmetry_on_random_states(grid48):
    y1 = smooth_state(grid48, seed=11)
    y2 = smooth_state(grid48, seed=12)
    a = sw.symplectic_form(y1, y2)
    b = sw.symplectic_form(y2, y1)
    assert abs(a + b) < 1e-12 * max(abs(a), 1.0)
    assert abs(sw.symplectic_form(y1, y1)) < 1e-12


def test_vector_block():
    # Omega((0,0,e1,0),(0,0,0,e1)) = 1
    grid = sw.Grid3(16, 4.0)
    zero = np.zeros(grid.shape)
    y1 = sw.PhaseState(sw.FieldPair(grid, zero, zero), np.eye(3)[0], np.zeros(3))
    y2 = sw.PhaseState(sw.FieldPair(grid, zero.copy(), zero.copy()), np.zeros(3), np.eye(3)[0])
    assert sw.symplectic_form(y1, y2) == pytest.approx(1.0)


def test_component_formula_matches_bracket(grid48):
    # <Y1, J Y2> with J(psi,pi,q,p) = (pi,-psi,p,-q) equals the form
    y1 = smooth_state(grid48, seed=21)
    y2 = smooth_state(grid48, seed=22)
    jy2 = sw.PhaseState(
        sw.FieldPair(grid48, y2.fields.pi, -y2.fields.psi), y2.p, -y2.q
    )
    bracket = (
        grid48.inner(y1.fields.psi, jy2.fields.psi)
        + grid48.inner(y1.fields.pi, jy2.fields.pi)
        + float(y1.q @ jy2.q)
        + float(y1.p @ jy2.p)
    )
    assert abs(bracket - sw.symplectic_form(y1, y2)) < 1e-12 * max(abs(bracket), 1)


def test_omega_tau14_spectral_oracle(grid64, rho64):
    """Omega(tau_1, tau_4) against a direct spectral Parseval quadrature."""
    frame = sw.tangent_frame(rho64, V03, grid64)
    val = sw.symplectic_form(frame[0], frame[3])
    t1, t4 = frame[0], frame[3]
    oracle = (
        grid64.inner_spectral(t1.fields.psi_hat, t4.fields.pi_hat)
        - grid64.inner_spectral(t1.fields.pi_hat, t4.fields.psi_hat)
        + float(t1.Q @ t4.P - t1.P @ t4.Q)
    )
    assert abs(val - oracle) < 1e-10 * max(abs(val), 1e-3)
    # e1 . Bv^{-1} e1 is the vector contribution
    assert float(t1.Q @ t4.P) == pytest.approx(sw.bv_inverse(V03)[0, 0])


def test_omega_matrix_structure(grid64, rho64):
    frame0 = sw.tangent_frame(rho64, np.zeros(3), grid64)
    om0 = sw.omega_matrix(frame0)
    # translation-translation block vanishes by parity at v = 0
    assert np.max(np.abs(om0.entries[:3, :3])) < 1e-12
    assert np.max(np.abs(om0.entries + om0.entries.T)) < 1e-10 * np.max(
        np.abs(om0.entries)
    )


@pytest.mark.parametrize("vmag", [0.0, 0.3, 0.6])
def test_omega_nondegenerate(grid64, rho64, vmag):
    frame = sw.tangent_frame(rho64, np.array([vmag, 0, 0]), grid64)
    om = sw.omega_matrix(frame)
    assert abs(om.det) > 1e-6


def test_omega_translation_invariance(grid64, rho64):
    """Omega(v) depends on v only: entries from a b-shifted frame agree."""
    frame = sw.tangent_frame(rho64, V03, grid64)
    om = sw.omega_matrix(frame)
    b = np.array([1.0, -0.75, 0.5])
    shifted = [sw.translate(frame[j], b) for j in range(6)]
    # remove the translation bookkeeping: tangent vectors transport their
    # field parts only; Q, P blocks are b-independent already
    for j in range(6):
        shifted[j] = sw.LinState(shifted[j].fields, frame[j].Q, frame[j].P)
    worst = 0.0
    for l in range(6):
        for j in range(6):
            worst = max(
                worst,
                abs(sw.symplectic_form(shifted[l], shifted[j]) - om.entries[l, j]),
            )
    assert worst < 1e-10 * np.max(np.abs(om.entries))


def test_transversal_projector(grid64, rho64):
    frame = sw.tangent_frame(rho64, V03, grid64)
    om = sw.omega_matrix(frame)
    z = smooth_linstate(grid64, seed=31)
    pz = sw.project_transversal(z, frame, om)
    scale = max(abs(sw.symplectic_form(frame[j], z)) for j in range(6))
    # symplectic orthogonality to every frame vector
    for j in range(6):
        assert abs(sw.symplectic_form(frame[j], pz)) < 1e-10 * max(scale, 1.0)
    # idempotence
    pz2 = sw.project_transversal(pz, frame, om)
    diff = (
        sw.FieldPair(
            grid64, pz2.fields.psi - pz.fields.psi, pz2.fields.pi - pz.fields.pi
        ).f_norm()
        + np.linalg.norm(pz2.Q - pz.Q)
        + np.linalg.norm(pz2.P - pz.P)
    )
    assert diff < 1e-10 * pz.e_norm()
    # the projector annihilates its own tangent space
    for j in range(6):
        ptau = sw.project_transversal(frame[j], frame, om)
        assert ptau.e_norm() < 1e-10 * frame[j].e_norm()


def test_decomposition(grid64, rho64):
    frame = sw.tangent_frame(rho64, V03, grid64)
    om = sw.omega_matrix(frame)
    z = smooth_linstate(grid64, seed=32)
    coeffs, pz = sw.decompose(z, frame, om)
    recon_psi = pz.fields.psi.copy()
    recon_pi = pz.fields.pi.copy()
    recon_q = pz.Q.copy()
    recon_p = pz.P.copy()
    for j in range(6):
        recon_psi += coeffs[j] * frame[j].fields.psi
        recon_pi += coeffs[j] * frame[j].fields.pi
        recon_q += coeffs[j] * frame[j].Q
        recon_p += coeffs[j] * frame[j].P
    err = (
        np.max(np.abs(recon_psi - z.fields.psi))
        + np.max(np.abs(recon_pi - z.fields.pi))
        + np.max(np.abs(recon_q - z.Q))
        + np.max(np.abs(recon_p - z.P))
    )
    assert err < 1e-10 * z.e_norm()


def test_projection_fixed_point(grid64, rho64):
    sigma = sw.SolitonParams(np.array([0.6, -0.4, 0.2]), V03)
    y = sw.soliton_state(rho64, sigma, grid64)
    guess = sw.SolitonParams(sigma.b + 0.1, sigma.v - 0.03)
    res = sw.project_to_manifold(y, guess, rho64)
    assert np.max(np.abs(res.sigma.b - sigma.b)) < 1e-8
    assert np.max(np.abs(res.sigma.v - sigma.v)) < 1e-8
    assert res.transversal.e_norm() < 1e-8 * y.e_norm()


def test_projection_equivariance(grid64, rho64):
    sigma = sw.SolitonParams(np.zeros(3), V03)
    y = sw.soliton_state(rho64, sigma, grid64)
    z = smooth_linstate(grid64, seed=41)
    eps = 1e-3 / max(z.e_norm(), 1.0)
    yp = sw.PhaseState(
        sw.FieldPair(
            grid64,
            y.fields.psi + eps * z.fields.psi,
            y.fields.pi + eps * z.fields.pi,
        ),
        y.q + eps * z.Q,
        y.p + eps * z.P,
    )
    a = np.array([0.8, 0.3, -0.5])
    res = sw.project_to_manifold(yp, sigma, rho64)
    res_shift = sw.project_to_manifold(
        sw.translate(yp, a), sw.SolitonParams(sigma.b + a, sigma.v), rho64
    )
    assert np.max(np.abs(res_shift.sigma.b - (res.sigma.b + a))) < 1e-8
    assert np.max(np.abs(res_shift.sigma.v - res.sigma.v)) < 1e-8


def test_projection_of_transversal_perturbation(grid64, rho64):
    """Pi(S(sigma) + eps Z_perp) returns sigma: transversal data moves the
    projection only at second order."""
    sigma = sw.SolitonParams(np.zeros(3), V03)
    y = sw.soliton_state(rho64, sigma, grid64)
    frame = sw.tangent_frame(rho64, V03, grid64)
    om = sw.omega_matrix(frame)
    zp = sw.project_transversal(smooth_linstate(grid64, seed=42), frame, om)
    eps = 1e-3 / zp.e_norm()
    yp = sw.PhaseState(
        sw.FieldPair(
            grid64,
            y.fields.psi + eps * zp.fields.psi,
            y.fields.pi + eps * zp.fields.pi,
        ),
        y.q + eps * zp.Q,
        y.p + eps * zp.P,
    )
    res = sw.project_to_manifold(yp, sigma, rho64)
    assert np.max(np.abs(res.sigma.b - sigma.b)) < 1e-8
    assert np.max(np.abs(res.sigma.v - sigma.v)) < 1e-8


def test_projection_domain_guard(grid64, rho64):
    y = sw.soliton_state(rho64, sw.SolitonParams(np.zeros(3), V03), grid64)
    with pytest.raises(DomainError):
        sw.project_to_manifold(
            y, sw.SolitonParams(np.zeros(3), np.array([0.96, 0, 0])), rho64, v_cap=0.95
        )


def test_projection_basin_error(grid64, rho64):
    # far outside the basin: a state with no soliton structure at all
    y = smooth_state(grid64, seed=51, scale=50.0)
    with pytest.raises((BasinError, DomainError)):
        sw.project_to_manifold(
            y, sw.SolitonParams(np.zeros(3), V03), rho64, max_iters=12
        )
