import numpy as np
import pytest

import solwave as sw
from solwave.errors import DomainError
from solwave.spectral import _profile_and_cut

V03 = np.array([0.3, 0.0, 0.0])


# -- g_lambda ---------------------------------------------------------------


def test_g_lambda_static():
    # v = 0: g = e^{-lam |y|} / (4 pi |y|)
    y = np.array([0.7, -0.3, 0.4])
    r = np.linalg.norm(y)
    val = sw.g_lambda(0.8, y, np.zeros(3))
    assert val == pytest.approx(np.exp(-0.8 * r) / (4 * np.pi * r))


def test_g_lambda_kappas():
    # v = 0.6 e1, lam = 1: kap = 1.25, kap1 = 0.75
    v = np.array([0.6, 0, 0])
    gam = sw.gamma_of(v)
    assert gam * 1.0 == pytest.approx(1.25)
    assert gam * 0.6 * 1.0 == pytest.approx(0.75)
    lam = 1.0
    y = np.array([0.5, 0.4, -0.2])
    yt1 = gam * y[0]
    rt = np.sqrt(yt1**2 + y[1] ** 2 + y[2] ** 2)
    expect = gam * np.exp(-1.25 * rt - 0.75 * yt1) / (4 * np.pi * rt)
    assert sw.g_lambda(lam, y, v) == pytest.approx(expect)
    # 0 < Re kap1 < Re kap
    assert 0 < 0.75 < 1.25


def test_g_lambda_guards():
    with pytest.raises(DomainError):
        sw.g_lambda(-1.0, np.ones(3), np.zeros(3))
    with pytest.raises(DomainError):
        sw.g_lambda(1.0, np.zeros(3), np.zeros(3))


@pytest.mark.parametrize("vmag", [0.0, 0.3, 0.6])
def test_g_lambda_symbol_oracle(grid64, vmag):
    """Applying the operator spectrally to sampled g reproduces the delta.

    D(k) ghat must equal the transform of the discrete delta,
    (2 pi)^{-3/2}, on well-resolved modes; the singular-cell sampling
    limits this to quadrature accuracy.
    """
    v = np.array([vmag, 0.0, 0.0])
    gl = sw.g_lambda_grid(1.0, grid64, v)
    ghat = grid64.to_spectral(gl)
    symbol = grid64.k2 + (1j * vmag * grid64.kx + 1.0) ** 2
    target = (2 * np.pi) ** (-1.5)
    low = grid64.kabs <= grid64.k_nyquist / 4
    err = np.max(np.abs(symbol[low] * ghat[low] - target)) / target
    assert err < 5e-2


# -- K, H, F, M ---------------------------------------------------------------


def test_kh_diagonal_and_refinement(rho64):
    se = sw.kh_matrices(rho64, V03, 0.5, check_refinement=True, check_offdiag=True)
    assert se.diag_offmax < 1e-10
    assert se.K[0, 0] > 0 and se.K[1, 1] > 0  # positive definite
    assert se.K[1, 1] == pytest.approx(se.K[2, 2])
    assert se.H[1, 1] == se.H[2, 2]


@pytest.mark.parametrize("vmag", [0.0, 0.3])
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_two_route_h(rho64, vmag, lam):
    """k-space quadrature vs real-space g-convolution (Bessel expansion)."""
    v = np.array([vmag, 0.0, 0.0])
    se = sw.kh_matrices(rho64, v, lam)
    c1 = sw.h_convolution(rho64, v, lam, 1)
    c2 = sw.h_convolution(rho64, v, lam, 2)
    assert abs(se.H[0, 0] - c1) < 1e-4 * abs(se.H[0, 0])
    assert abs(se.H[1, 1] - c2) < 1e-4 * abs(se.H[1, 1])


def test_f_bounded_on_halfplane(rho64):
    vals = []
    for lam in (1e-3, 0.1, 0.5, 2.0, 10.0, 50.0):
        se = sw.kh_matrices(rho64, V03, lam)
        vals.append(np.max(np.abs(se.F)))
    assert np.isfinite(vals).all()
    assert max(vals) < 10.0 * np.max(np.abs(se.K))


def test_f_vanishes_at_zero(rho64):
    """F(0) = 0 and F'(0) = 0 along real lam -> 0+ (odd-integrand identity)."""
    eps = 1e-3
    f1 = sw.kh_matrices(rho64, V03, eps).F
    f2 = sw.kh_matrices(rho64, V03, 2 * eps).F
    scale = np.max(np.abs(sw.kh_matrices(rho64, V03, 1.0).K))
    assert np.max(np.abs(f1)) < 1e-5 * scale  # F(eps) = O(eps^2)
    deriv = 2.0 * f1 / eps - f2 / (2.0 * eps)  # one-sided Richardson
    assert np.max(np.abs(deriv)) < 1e-6 * scale


def test_analyticity_mean_value(rho64):
    """H_jj satisfies the mean-value property on a circle in Re lam > 0."""
    lam0 = 1.0 + 0.3j
    r = 0.2
    thetas = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    center = sw.kh_matrices(rho64, V03, lam0).H[0, 0]
    ring = [
        sw.kh_matrices(rho64, V03, lam0 + r * np.exp(1j * th)).H[0, 0]
        for th in thetas
    ]
    assert abs(np.mean(ring) - center) < 1e-6 * abs(center)


# -- on-axis ------------------------------------------------------------------


@pytest.mark.parametrize("om", [0.5, 1.0, 3.0, -0.5, -1.0, -3.0])
def test_on_axis_signs_and_det(rho64, om):
    se = sw.on_axis(rho64, V03, om)
    for j in range(3):
        assert np.sign(om) * se.F[j, j].imag < 0
    assert abs(se.detM) > 0
    assert abs(se.detM - se.detM_closed) < 1e-8 * abs(se.detM_closed)


def test_eps_limit_consistency(rho64):
    """H(i om + eps) at eps = 1e-2, 1e-3 extrapolates to the on-axis value."""
    om = 1.0
    target = sw.on_axis(rho64, V03, om).H[0, 0]
    ha = sw.kh_matrices(rho64, V03, 1e-2 + 1j * om).H[0, 0]
    hb = sw.kh_matrices(rho64, V03, 1e-3 + 1j * om).H[0, 0]
    extrap = hb + (hb - ha) * 1e-3 / (1e-2 - 1e-3)
    assert abs(extrap - target) < 1e-3 * abs(target)


def test_det_vanishes_at_origin(rho64):
    """det M(i om) -> 0 as om -> 0 while the reduced factors stay positive."""
    dets = [abs(sw.on_axis(rho64, V03, om).detM) for om in (0.4, 0.2, 0.1)]
    assert dets[0] > dets[1] > dets[2]
    # om^6 scaling of -(om^2+nu^3 f1)(om^2+nu f)^2 with f = O(om^2)
    assert dets[2] < dets[0] * (0.1 / 0.4) ** 5
    r1, r = sw.r_at_zero(rho64, V03)
    nu = sw.nu_of(V03)
    assert 1 - nu**3 * r1 > 0 and 1 - nu * r > 0


# -- inverse blocks -----------------------------------------------------------


def test_r_at_zero_negative(rho64):
    r1, r = sw.r_at_zero(rho64, V03)
    assert r1 < 0 and r < 0


def test_inverse_blocks_identities(rho64):
    se = sw.on_axis(rho64, V03, 1.0)
    se = sw.inverse_blocks(se)
    binv = sw.bv_inverse(V03)
    assert np.max(np.abs(se.L11 - 1j * se.L12 @ binv)) < 1e-10
    assert np.max(np.abs(se.L @ se.M - np.eye(6))) < 1e-8
    # r_j(om) = -F_jj / om^2
    assert se.r1 == pytest.approx(-se.F[0, 0] / 1.0, rel=1e-12)


def test_r0_expansion(rho64):
    """om L(om) approaches a constant matrix with O(1/om) entry drift."""
    l20 = sw.inverse_blocks(sw.on_axis(rho64, V03, 20.0))
    l40 = sw.inverse_blocks(sw.on_axis(rho64, V03, 40.0))
    m20 = 20.0 * l20.L
    m40 = 40.0 * l40.L
    drift = np.max(np.abs(m20 - m40))
    assert drift < 2.0 / 20.0  # O(1/om) between om = 20 and 40
    # the limit matrix R0 = diag(-i)
    assert np.max(np.abs(m40 - np.diag([-1j] * 6))) < 0.1


# -- Phi ----------------------------------------------------------------------


def test_phi_zero_data(grid64, rho64):
    zero = np.zeros(grid64.shape, dtype=complex)
    ph = sw.phi_eval(rho64, V03, zero, zero, lambdas=[0.5])
    assert np.all(ph.phi0 == 0)
    assert np.all(ph.phi_prime0 == 0)
    assert np.all(ph.phi_at[0.5 + 0j] == 0)


def test_phi_time_domain_route(grid64, rho64):
    """Laplace transform of <W^1(t)F0, grad rho> vs the k-space quadrature."""
    X, Y, Z = grid64.xmesh()
    env = np.exp(-(X**2 + Y**2 + Z**2) / (2 * 0.8**2))
    f0 = sw.FieldPair(grid64, 0.3 * env, -0.2 * X * env)
    pk = sw.phi_eval(rho64, np.zeros(3), f0.psi_hat, f0.pi_hat, lambdas=[0.5])
    pt = sw.phi_time_domain(rho64, np.zeros(3), f0, 0.5, t_max=13.0, n_nodes=110)
    ref = pk.phi_at[0.5 + 0j]
    assert np.max(np.abs(ref - pt)) < 1e-3 * max(np.max(np.abs(ref)), 1e-10)


def test_orthogonality_identity(grid64, rho64, rng):
    """Omega(X0, tau_j) = -Phi_j(0) - P0_j and
    Omega(X0, tau_{3+j}) = Phi'_j(0) + (Bv^{-1} Q0)_j  for random states."""
    frame = sw.tangent_frame(rho64, V03, grid64)
    binv = sw.bv_inverse(V03)
    X, Y, Z = grid64.xmesh()
    worst = 0.0
    scale = 0.0
    for trial in range(6):
        env = np.exp(-((X - 0.5 * trial % 2) ** 2 + Y**2 + Z**2) / 3.0)
        psi0 = env * np.cos(0.6 * X + 0.1 * trial * Y)
        pi0 = env * np.sin(0.4 * Z - 0.2 * X + trial)
        q0 = rng.standard_normal(3)
        p0 = rng.standard_normal(3)
        x0 = sw.LinState(sw.FieldPair(grid64, psi0, pi0), q0, p0)
        ph = sw.phi_eval(rho64, V03, x0.fields.psi_hat, x0.fields.pi_hat)
        for j in range(3):
            lhs = sw.symplectic_form(x0, frame[j])
            rhs = -ph.phi0[j] - p0[j]
            worst = max(worst, abs(lhs - rhs))
            scale = max(scale, abs(lhs))
            lhs = sw.symplectic_form(x0, frame[3 + j])
            rhs = ph.phi_prime0[j] + (binv @ q0)[j]
            worst = max(worst, abs(lhs - rhs))
            scale = max(scale, abs(lhs))
    assert worst < 1e-6 * max(scale, 1.0)


def test_rotation_to_axis():
    v = np.array([0.2, -0.1, 0.25])
    R = sw.rotation_to_axis(v)
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-14)
    assert np.allclose(R @ v, [np.linalg.norm(v), 0, 0], atol=1e-14)


def test_profile_cut(rho64):
    prof, kmax = _profile_and_cut(rho64)
    assert 5.0 < kmax < 25.0
    assert abs(np.asarray(prof(kmax))) < 1e-12 * abs(np.asarray(prof(2.45)))
