"""Weighted norms, modulation extraction, decay fits, scattering state.

These are the observables of the long-time analysis: the projection track
sigma(t) = (b(t), v(t)) along the manifold, the transversal remainder
Z(t) = Y(t) - S(sigma(t)) measured in the weighted norm ||.||_{-beta}
(beta = 4 + delta), the majorant m(t) = sup_{s<=t} (1+s)^{1+delta}
||Z(s)||_{-beta}, and the scattering data (v_plus, a_plus, Psi_plus)
extracted by undoing the free wave group on the accompanying-soliton
remainder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .charge import ChargeDensity
from .dynamics import Trajectory
from .errors import BasinError
from .grid import Grid3
from .soliton import (
    FieldPair,
    LinState,
    PhaseState,
    SolitonParams,
    bv_inverse,
    soliton_spectra,
    tangent_spectra,
)
from .symplectic import project_to_manifold

DEFAULT_DELTA = 0.25


# -- weighted norms -------------------------------------------------------


def _weight(grid: Grid3, alpha: float, center) -> np.ndarray:
    return (1.0 + grid.radius(center)) ** alpha


def weighted_field_norm(grid, f, alpha, center=None) -> float:
    w = _weight(grid, alpha, center)
    return float(np.sqrt(np.sum((w * f) ** 2) * grid.h**3))


def weighted_norm(y, alpha: float, center=None) -> float:
    """||Y||_alpha = ||psi||_{1,alpha} + ||pi||_{alpha+1} (+ |q| + |p|).

    ||psi||_{1,alpha} = ||psi||_alpha + ||grad psi||_alpha with the
    gradient taken spectrally; weights (1+|x-center|)^alpha default to the
    box center.  Accepts FieldPair, PhaseState and LinState.
    """
    fields = y if isinstance(y, FieldPair) else y.fields
    grid = fields.grid
    psih = fields.psi_hat
    val = weighted_field_norm(grid, fields.psi, alpha, center)
    for axis in range(3):
        gpart = grid.to_physical_real_part(grid.deriv(psih, axis))
        val += weighted_field_norm(grid, gpart, alpha, center)
    val += weighted_field_norm(grid, fields.pi, alpha + 1.0, center)
    if isinstance(y, PhaseState):
        val += float(np.linalg.norm(y.q)) + float(np.linalg.norm(y.p))
    elif isinstance(y, LinState):
        val += float(np.linalg.norm(y.Q)) + float(np.linalg.norm(y.P))
    return val


# -- modulation track -----------------------------------------------------


@dataclass
class ModulationTrack:
    times: np.ndarray
    b: np.ndarray  # (nt, 3)
    v: np.ndarray
    c: np.ndarray  # c(t) = b(t) - int_0^t v
    cdot: np.ndarray
    vdot: np.ndarray
    Z_norms: np.ndarray  # ||Z(t)||_{-beta}, soliton-frame weights
    T_norms: np.ndarray  # ||T(t)||_{+beta}
    residuals: np.ndarray
    newton_iters: np.ndarray
    beta: float
    failure_index: Optional[int] = None
    Z_states: Optional[list] = None
    norm_crosscheck: float = 0.0

    @property
    def complete(self) -> bool:
        return self.failure_index is None

    def sigma(self, i: int) -> SolitonParams:
        return SolitonParams(self.b[i], self.v[i])


def _central_diff(times, values):
    out = np.gradient(values, times, axis=0)
    return out


def _tangent_combination(rho, grid, v, coeff) -> LinState:
    """sum_j coeff[j] tau_j(v) assembled spectrally (masked support)."""
    psi_hats, pi_hats, Qs, Ps = tangent_spectra(rho, v, grid)
    psih = sum(coeff[j] * psi_hats[j] for j in range(6))
    pih = sum(coeff[j] * pi_hats[j] for j in range(6))
    Q = sum(coeff[j] * Qs[j] for j in range(6))
    P = sum(coeff[j] * Ps[j] for j in range(6))
    return LinState(FieldPair.from_spectral(grid, psih, pih), Q, P)


def extract_modulation(
    traj: Trajectory,
    rho: ChargeDensity,
    delta: float = DEFAULT_DELTA,
    *,
    keep_states: bool = False,
    projection_tol: float = 1e-10,
) -> ModulationTrack:
    """Project every snapshot onto the manifold and record sigma(t), Z(t).

    Z is measured in the soliton frame (fields shifted by -b(t), weights at
    the box center), which realizes the moving-frame weighted norm.  A
    basin loss truncates the track and sets failure_index.
    """
    beta = 4.0 + delta
    grid = traj.states[0].grid
    nt = len(traj.times)
    b = np.zeros((nt, 3))
    v = np.zeros((nt, 3))
    z_norms = np.zeros(nt)
    t_norms = np.zeros(nt)
    residuals = np.zeros(nt)
    iters = np.zeros(nt, dtype=int)
    z_states = [] if keep_states else None
    crosscheck = 0.0

    guess = None
    failure = None
    for i, state in enumerate(traj.states):
        if guess is None:
            from .soliton import velocity_of_momentum

            guess = SolitonParams(state.q.copy(), velocity_of_momentum(state.p))
        try:
            res = project_to_manifold(
                state, guess, rho, projection_tol=projection_tol
            )
        except BasinError:
            failure = i
            break
        b[i] = res.sigma.b
        v[i] = res.sigma.v
        residuals[i] = res.residual
        iters[i] = res.newton_iters
        z_mov = res.transversal_moving_frame()
        z_norms[i] = weighted_norm(z_mov, -beta)
        # second route: rebuild Z from the snapshot and sigma directly
        psih, pih = soliton_spectra(rho, res.sigma.v, grid)
        ph = grid.shift_phase(-res.sigma.b)
        z2 = LinState(
            FieldPair.from_spectral(
                grid,
                state.fields.psi_hat * ph - psih,
                state.fields.pi_hat * ph - pih,
                strict=False,
            ),
            state.q - res.sigma.b,
            state.p - res.sigma.p_v,
        )
        crosscheck = max(crosscheck, abs(weighted_norm(z2, -beta) - z_norms[i]))
        if keep_states:
            z_states.append(z_mov)
        guess = res.sigma
        state.fields.drop_spectral_cache()  # bound memory over long tracks

    if failure is not None:
        sl = slice(0, failure)
        times = traj.times[sl]
        b, v = b[sl], v[sl]
        z_norms, t_norms = z_norms[sl], t_norms[sl]
        residuals, iters = residuals[sl], iters[sl]
    else:
        times = traj.times

    # c(t) = b(t) - int_0^t v ds; cdot = bdot - v; all on snapshot times
    int_v = np.zeros_like(b)
    if len(times) > 1:
        dv = 0.5 * (v[1:] + v[:-1]) * np.diff(times)[:, None]
        int_v[1:] = np.cumsum(dv, axis=0)
    c = b - int_v
    cdot = _central_diff(times, b) - v if len(times) > 1 else np.zeros_like(b)
    vdot = _central_diff(times, v) if len(times) > 1 else np.zeros_like(v)

    # T(t) = -sum_l [ cdot_l tau_l + vdot_l tau_{3+l} ]
    for i in range(len(times)):
        coeff = -np.concatenate([cdot[i], vdot[i]])
        T = _tangent_combination(rho, grid, v[i], coeff)
        t_norms[i] = weighted_norm(T, beta)

    return ModulationTrack(
        times=times,
        b=b,
        v=v,
        c=c,
        cdot=cdot,
        vdot=vdot,
        Z_norms=z_norms,
        T_norms=t_norms,
        residuals=residuals,
        newton_iters=iters,
        beta=beta,
        failure_index=failure,
        Z_states=z_states,
        norm_crosscheck=crosscheck,
    )


# -- decay fits -----------------------------------------------------------


@dataclass
class DecayFit:
    exponent: float
    prefactor: float
    window: tuple
    residual: float
    n_samples: int


def fit_decay(times, values, window) -> DecayFit:
    """Least-squares power-law fit value ~ prefactor * t^exponent on window."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    t0, t1 = window
    if not t1 > t0:
        raise ValueError("empty fit window")
    sel = (times >= t0) & (times <= t1)
    if np.any(values[sel] <= 0.0) or np.any(times[sel] <= 0.0):
        raise ValueError("power-law fit requires positive times and values")
    lt, lv = np.log(times[sel]), np.log(values[sel])
    if lt.size < 2:
        raise ValueError(f"window {window} contains {lt.size} samples")
    coef = np.polyfit(lt, lv, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, lt) - lv) ** 2)))
    return DecayFit(
        exponent=float(coef[0]),
        prefactor=float(np.exp(coef[1])),
        window=(float(t0), float(t1)),
        residual=resid,
        n_samples=int(lt.size),
    )


# -- majorant and frame drift ----------------------------------------------


def majorant_and_drift(track: ModulationTrack, delta: float, t1: float) -> dict:
    """m(t) = sup_{s<=t}(1+s)^{1+delta}||Z(s)||_{-beta} and the frame drift

        d1(t) = int_{t1}^t (w(s) - v(t1)) ds,
        w(s) - v(t1) = cdot(s) + int_s^{t1} vdot(tau) dtau,

    both on the snapshot times up to t1.
    """
    times = track.times
    if times.size == 0 or t1 > times[-1] + 1e-12:
        raise ValueError("track does not reach t1")
    m = np.maximum.accumulate((1.0 + times) ** (1.0 + delta) * track.Z_norms)

    sel = times <= t1 + 1e-12
    ts = times[sel]
    # int_s^{t1} vdot dtau, cumulative from the right end
    vd = track.vdot[sel]
    tail = np.zeros_like(vd)
    if len(ts) > 1:
        seg = 0.5 * (vd[1:] + vd[:-1]) * np.diff(ts)[:, None]
        tail[:-1] = np.cumsum(seg[::-1], axis=0)[::-1]
    integrand = track.cdot[sel] + tail
    d1 = np.zeros_like(vd)
    if len(ts) > 1:
        seg = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(ts)[:, None]
        # d1(t) = -int_t^{t1} (...) ds
        d1[:-1] = -np.cumsum(seg[::-1], axis=0)[::-1]
    return {"times": times, "m": m, "d1_times": ts, "d1": d1}


# -- scattering state -----------------------------------------------------


def scattering_state(traj: Trajectory, rho: ChargeDensity) -> dict:
    """Extract (Psi_plus, v_plus, a_plus) from the accompanying soliton.

    Z(t) = F(t) - F_{v(t)}(x - q(t)) with v(t) = qdot(t); undoing the free
    group, W0(-t) Z(t), must be Cauchy in the energy space.  Reported are
    the Cauchy differences between consecutive snapshots, the final
    estimate of Psi_plus, v_plus as the late-time mean of qdot and a_plus
    from the affine tail of q(t).
    """
    grid = traj.states[0].grid
    times = traj.times
    w = grid.kabs
    cauchy = []
    prev = None
    last = None
    for i, state in enumerate(traj.states):
        t = times[i]
        j = int(np.argmin(np.abs(traj.particle_times - t)))
        vt = traj.particle_qdot[j]
        psih, pih = soliton_spectra(rho, vt, grid)
        ph = grid.shift_phase(state.q)
        zpsi = state.fields.psi_hat - psih * ph
        zpi = state.fields.pi_hat - pih * ph
        state.fields.drop_spectral_cache()
        # W0(-t) applied spectrally
        c, s = np.cos(w * t), np.sin(w * t)
        sinc = np.where(w > 0, s / np.where(w == 0, 1.0, w), t)
        upsi = c * zpsi - sinc * zpi
        upi = w * s * zpsi + c * zpi
        if prev is not None:
            cauchy.append(
                grid.l2_norm_spectral(w * (upsi - prev[0]))
                + grid.l2_norm_spectral(upi - prev[1])
            )
        prev = (upsi, upi)
        last = prev
    cauchy = np.array(cauchy)
    psi_plus = FieldPair.from_spectral(grid, last[0], last[1], strict=False)

    # late-time particle data
    pt = traj.particle_times
    qd = traj.particle_qdot
    tail = pt >= 0.75 * pt[-1]
    v_plus = qd[tail].mean(axis=0)
    a_plus = (traj.particle_q[tail] - v_plus * pt[tail, None]).mean(axis=0)
    spread = np.linalg.norm(qd[tail] - v_plus, axis=1)
    vscale = max(np.linalg.norm(v_plus), 1e-12)
    converged = bool(spread.max() <= 0.10 * vscale)

    return {
        "psi_plus": psi_plus,
        "cauchy": cauchy,
        "cauchy_times": times[1:],
        "v_plus": v_plus,
        "a_plus": a_plus,
        "converged": converged,
        "qdot_spread": float(spread.max() / vscale),
    }
