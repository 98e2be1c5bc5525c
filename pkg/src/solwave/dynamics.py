"""Time integration: full nonlinear system, frozen linearization, wave groups.

The field equations are integrated exactly per spectral mode (rotation by
the dispersion phase plus the particular solution of the frozen source),
so there is no CFL stability constraint; all time-stepping error lives in
the Strang splitting between field and particle and is O(dt^2).  Particle
substeps use classic fourth-order Runge-Kutta inside each half step.

Mode updates.  With mu = k.v (zero for the nonlinear system, where the
drift is absent) the field block reads

    d/dt (Psi, Pi) = M (Psi, Pi) + (0, s),   M = [[-i mu, 1], [-k^2, -i mu]],

whose flow is exp(Mt) = exp(-i mu t) * [[cos wt, sin wt / w], [-w sin wt,
cos wt]], w = |k|.  For a source s frozen during the step the update is
X(t+dt) = exp(M dt)(X - Xp) + Xp with Xp = (s/D0, i mu s/D0), D0 = k^2-mu^2.
The k = 0 mode never carries a source (rhohat(0) = 0 for admissible rho).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .charge import ChargeDensity
from .errors import BlowupError, DomainError, SolwaveError
from .grid import Grid3
from .soliton import (
    FieldPair,
    LinState,
    PhaseState,
    soliton_spectra,
    velocity_of_momentum,
)

DEFAULT_DT_FACTOR = 0.25
DEFAULT_DRIFT_TOL = 1e-6
DEFAULT_V_CAP = 0.95


@dataclass
class SimConfig:
    grid: Grid3
    rho: ChargeDensity
    initial: PhaseState
    t_end: float
    dt: Optional[float] = None  # defaults to 0.25 h
    scheme: str = "strang"
    record_every: int = 8
    v_cap: float = DEFAULT_V_CAP
    drift_tol: float = DEFAULT_DRIFT_TOL
    enforce_horizon: bool = False
    snapshot_dtype: str = "float64"

    def __post_init__(self):
        if self.dt is None:
            self.dt = DEFAULT_DT_FACTOR * self.grid.h
        if self.scheme != "strang":
            raise SolwaveError(f"unknown scheme {self.scheme!r}")
        if self.dt == 0 or self.t_end <= 0:
            raise SolwaveError("need dt != 0 and t_end > 0 (dt < 0 runs backward)")
        if abs(self.dt) > 0.5 * self.grid.h:
            warnings.warn(
                f"dt={self.dt:.4f} exceeds 0.5 h: splitting error degrades",
                stacklevel=2,
            )

    def horizon_margin(self) -> float:
        """(L/2 - R_rho - max|q| estimate) - t_end; negative means wrap risk."""
        q0 = float(np.max(np.abs(self.initial.q)))
        return (
            self.grid.box_length / 2.0
            - self.rho.effective_radius
            - (q0 + self.t_end)
        ) - self.t_end


@dataclass
class Trajectory:
    times: np.ndarray
    states: list  # PhaseState (nonlinear) or LinState (linearized) snapshots
    energies: np.ndarray
    particle_times: np.ndarray
    particle_q: np.ndarray
    particle_p: np.ndarray
    particle_qdot: np.ndarray
    meta: dict = field(default_factory=dict)


class _ModeUpdater:
    """Cached per-mode rotation for one (grid, v, dt) combination."""

    def __init__(self, grid: Grid3, v, dt: float):
        self.grid = grid
        self.dt = dt
        w = grid.kabs
        self.cos = np.cos(w * dt)
        s = np.sin(w * dt)
        self.sinc = np.where(w > 0, s / np.where(w == 0, 1.0, w), dt)
        self.wsin = w * s
        mu = grid.kdotv(v)
        self.drift = np.exp(-1j * mu * dt) if np.any(np.asarray(v) != 0) else None
        d0 = grid.k2 - mu * mu
        d0.flat[0] = 1.0
        self.inv_d0 = 1.0 / d0
        self.mu = mu

    def step(self, psih, pih, source):
        """Advance one dt with the Pi-equation source frozen at `source`."""
        if source is None:
            a, b = psih, pih
            xp = xq = None
        else:
            xp = source * self.inv_d0
            xp.flat[0] = 0.0
            xq = 1j * self.mu * xp if self.drift is not None else None
            a = psih - xp
            b = (pih - xq) if xq is not None else pih
        np_psi = self.cos * a + self.sinc * b
        np_pi = -self.wsin * a + self.cos * b
        if self.drift is not None:
            np_psi = self.drift * np_psi
            np_pi = self.drift * np_pi
        if source is not None:
            np_psi += xp
            if xq is not None:
                np_pi += xq
        return np_psi, np_pi


class _ChargeCoupling:
    """Masked-mode data for force sums and source phases."""

    def __init__(self, rho: ChargeDensity, grid: Grid3):
        mask = rho.support_mask()
        self.mask = mask
        self.kx = grid.kx[mask]
        self.ky = grid.ky[mask]
        self.kz = grid.kz[mask]
        self.rh_conj = np.conj(rho.rho_hat[mask])
        self.dk3 = grid.dk**3

    def force(self, psih_m, q):
        """F_j = <psi, d_j rho(.-q)> = dk^3 Re sum i k_j psihat conj(rhohat) e^{-ik.q}."""
        ph = np.exp(-1j * (self.kx * q[0] + self.ky * q[1] + self.kz * q[2]))
        base = psih_m * self.rh_conj * ph
        return self.dk3 * np.array(
            [
                np.real(np.sum(1j * self.kx * base)),
                np.real(np.sum(1j * self.ky * base)),
                np.real(np.sum(1j * self.kz * base)),
            ]
        )

    def coupling_energy(self, psih_m, q):
        """<psi, rho(.-q)> on the masked modes."""
        ph = np.exp(-1j * (self.kx * q[0] + self.ky * q[1] + self.kz * q[2]))
        return self.dk3 * float(np.real(np.sum(psih_m * self.rh_conj * ph)))


def _rk4(q, p, rhs, dt):
    k1q, k1p = rhs(q, p)
    k2q, k2p = rhs(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
    k3q, k3p = rhs(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
    k4q, k4p = rhs(q + dt * k3q, p + dt * k3p)
    return (
        q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q),
        p + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p),
    )


def hamiltonian(y: PhaseState, rho: ChargeDensity) -> float:
    """H = (1/2) int (|pi|^2 + |grad psi|^2) + int psi rho(.-q) + sqrt(1+p^2)."""
    g = y.grid
    g.require_same(rho.grid)
    psih, pih = y.fields.psi_hat, y.fields.pi_hat
    e = 0.5 * g.dk**3 * (
        float(np.sum(np.abs(pih) ** 2)) + float(np.sum(g.k2 * np.abs(psih) ** 2))
    )
    cpl = _ChargeCoupling(rho, g)
    e += cpl.coupling_energy(psih[cpl.mask], y.q)
    return e + float(np.sqrt(1.0 + y.p @ y.p))


def interaction_lower_bound(rho: ChargeDensity) -> float:
    """(1/2) <rho, Laplacian^{-1} rho> = -(1/2) dk^3 sum |rhohat|^2/k^2, k != 0."""
    g = rho.grid
    k2 = g.k2.copy()
    k2.flat[0] = 1.0
    val = np.abs(rho.rho_hat) ** 2 / k2
    val.flat[0] = 0.0
    return -0.5 * g.dk**3 * float(np.sum(val))


def run_nonlinear(cfg: SimConfig) -> Trajectory:
    """Strang splitting: half particle / exact field with frozen q / half particle."""
    grid, rho = cfg.grid, cfg.rho
    margin = cfg.horizon_margin()
    if margin < 0:
        msg = (
            f"wave-wrap horizon exceeded by {-margin:.1f} time units:"
            " periodic images can re-enter the charge region"
        )
        if cfg.enforce_horizon:
            raise BlowupError(msg)
        warnings.warn(msg, stacklevel=2)

    psih = cfg.initial.fields.psi_hat.copy()
    pih = cfg.initial.fields.pi_hat.copy()
    q = cfg.initial.q.astype(float).copy()
    p = cfg.initial.p.astype(float).copy()

    cpl = _ChargeCoupling(rho, grid)
    upd = _ModeUpdater(grid, np.zeros(3), cfg.dt)
    mask = cpl.mask
    rho_hat_m = np.conj(cpl.rh_conj)

    def particle_rhs(qq, pp):
        return velocity_of_momentum(pp), cpl.force(psih[mask], qq)

    def source_at(qq):
        ph = np.exp(
            1j * (cpl.kx * qq[0] + cpl.ky * qq[1] + cpl.kz * qq[2])
        )
        src = np.zeros(grid.shape, dtype=complex)
        src[mask] = -rho_hat_m * ph
        return src

    nsteps = int(round(cfg.t_end / abs(cfg.dt)))
    dtype = np.dtype(cfg.snapshot_dtype)

    def snapshot():
        fp = FieldPair(
            grid,
            grid.to_physical_real(psih).astype(dtype),
            grid.to_physical_real(pih).astype(dtype),
        )
        return PhaseState(fp, q.copy(), p.copy())

    times = [0.0]
    states = [snapshot()]
    energies = [hamiltonian(states[0], rho)]
    pt, pq, pp_, pqd = [0.0], [q.copy()], [p.copy()], [velocity_of_momentum(p)]

    for i in range(nsteps):
        q, p = _rk4(q, p, particle_rhs, 0.5 * cfg.dt)
        psih, pih = upd.step(psih, pih, source_at(q))
        q, p = _rk4(q, p, particle_rhs, 0.5 * cfg.dt)
        t = (i + 1) * cfg.dt
        qd = velocity_of_momentum(p)
        speed = float(np.linalg.norm(qd))
        if speed >= cfg.v_cap:
            raise BlowupError(f"|qdot|={speed:.3f} reached v_cap at t={t:.3f}")
        pt.append(t)
        pq.append(q.copy())
        pp_.append(p.copy())
        pqd.append(qd)
        if (i + 1) % cfg.record_every == 0 or i == nsteps - 1:
            times.append(t)
            states.append(snapshot())
            energies.append(hamiltonian(states[-1], rho))
            drift = abs(energies[-1] - energies[0]) / max(abs(energies[0]), 1e-300)
            if drift > cfg.drift_tol:
                raise BlowupError(
                    f"energy drift {drift:.2e} exceeds tolerance at t={t:.3f}"
                )

    max_q = float(np.max(np.abs(np.array(pq))))
    wrap_margin = (
        grid.box_length / 2.0 - rho.effective_radius - max_q - cfg.t_end
    )
    return Trajectory(
        times=np.array(times),
        states=states,
        energies=np.array(energies),
        particle_times=np.array(pt),
        particle_q=np.array(pq),
        particle_p=np.array(pp_),
        particle_qdot=np.array(pqd),
        meta={"dt": cfg.dt, "wrap_margin": wrap_margin, "kind": "nonlinear"},
    )


def coupling_matrix(rho: ChargeDensity, v, grid: Grid3) -> np.ndarray:
    """C[j, l] = <d_j psi_v, d_l rho>; diagonal by parity."""
    psih, _ = soliton_spectra(rho, v, grid)
    mask = rho.support_mask()
    psim = psih[mask]
    rhm = np.conj(rho.rho_hat[mask])
    kvec = (grid.kx[mask], grid.ky[mask], grid.kz[mask])
    c = np.zeros((3, 3))
    for j in range(3):
        for l in range(3):
            c[j, l] = grid.dk**3 * float(
                np.real(np.sum(kvec[j] * kvec[l] * psim * rhm))
            )
    return c


def frozen_hamiltonian(x: LinState, rho: ChargeDensity, v) -> float:
    """H_{v,v}(X), the nonnegative quadratic form of the frozen linearization:

        (1/2) int |Pi + v.grad Psi|^2
      + (1/2) int |Lam^{1/2} Psi - Lam^{-1/2} Q.grad rho|^2 + (1/2) P.Bv P,

    Lam = -Laplacian + (v.grad)^2, evaluated spectrally.
    """
    g = x.grid
    v = np.asarray(v, dtype=float)
    psih, pih = x.fields.psi_hat, x.fields.pi_hat
    mu = g.kdotv(v)
    d0 = g.k2 - mu * mu
    d0.flat[0] = 1.0
    sq = np.sqrt(d0)
    term1 = np.abs(pih - 1j * mu * psih) ** 2
    src = -1j * (
        g.kx * x.Q[0] + g.ky * x.Q[1] + g.kz * x.Q[2]
    ) * rho.rho_hat
    comb = sq * psih - src / sq
    comb.flat[0] = 0.0
    term1.flat[0] = np.abs(pih.flat[0]) ** 2
    e = 0.5 * g.dk**3 * float(np.sum(term1) + np.sum(np.abs(comb) ** 2))
    from .soliton import bv_matrix

    return e + 0.5 * float(x.P @ bv_matrix(v) @ x.P)


def run_linearized(x0: LinState, v1, cfg: SimConfig) -> Trajectory:
    """Flow of the frozen linearized generator at velocity v1.

        Psi' = v.grad Psi + Pi
        Pi'  = Lap Psi + v.grad Pi + Q.grad rho
        Q'   = Bv P
        P'   = <Psi, grad rho> + C Q,   C[j,l] = <d_j psi_v, d_l rho>,

    by the same splitting as the nonlinear run (the drift v.grad joins the
    exact per-mode rotation).  Conserves the frozen Hamiltonian to O(dt^2).
    """
    grid, rho = cfg.grid, cfg.rho
    v1 = np.asarray(v1, dtype=float)
    if v1 @ v1 >= 1.0:
        raise DomainError("|v1| >= 1")

    from .soliton import bv_matrix

    bv = bv_matrix(v1)
    cmat = coupling_matrix(rho, v1, grid)
    cpl = _ChargeCoupling(rho, grid)
    mask = cpl.mask
    rho_hat_m = np.conj(cpl.rh_conj)
    upd = _ModeUpdater(grid, v1, cfg.dt)

    psih = x0.fields.psi_hat.copy()
    pih = x0.fields.pi_hat.copy()
    Q = x0.Q.astype(float).copy()
    P = x0.P.astype(float).copy()

    def field_force():
        base = psih[mask] * cpl.rh_conj
        return cpl.dk3 * np.array(
            [
                np.real(np.sum(1j * cpl.kx * base)),
                np.real(np.sum(1j * cpl.ky * base)),
                np.real(np.sum(1j * cpl.kz * base)),
            ]
        )

    def particle_rhs_factory():
        f0 = field_force()  # frozen field: constant within the substep
        def rhs(qq, pp):
            return bv @ pp, f0 + cmat @ qq
        return rhs

    def source_at(QQ):
        src = np.zeros(grid.shape, dtype=complex)
        src[mask] = -1j * (
            cpl.kx * QQ[0] + cpl.ky * QQ[1] + cpl.kz * QQ[2]
        ) * rho_hat_m
        return src

    nsteps = int(round(cfg.t_end / abs(cfg.dt)))
    dtype = np.dtype(cfg.snapshot_dtype)

    def snapshot():
        fp = FieldPair(
            grid,
            grid.to_physical_real(psih).astype(dtype),
            grid.to_physical_real(pih).astype(dtype),
        )
        return LinState(fp, Q.copy(), P.copy())

    times = [0.0]
    states = [snapshot()]
    energies = [frozen_hamiltonian(states[0], rho, v1)]
    pt, pq, pp_ = [0.0], [Q.copy()], [P.copy()]

    for i in range(nsteps):
        Q, P = _rk4(Q, P, particle_rhs_factory(), 0.5 * cfg.dt)
        psih, pih = upd.step(psih, pih, source_at(Q))
        Q, P = _rk4(Q, P, particle_rhs_factory(), 0.5 * cfg.dt)
        t = (i + 1) * cfg.dt
        pt.append(t)
        pq.append(Q.copy())
        pp_.append(P.copy())
        if (i + 1) % cfg.record_every == 0 or i == nsteps - 1:
            times.append(t)
            states.append(snapshot())
            energies.append(frozen_hamiltonian(states[-1], rho, v1))

    return Trajectory(
        times=np.array(times),
        states=states,
        energies=np.array(energies),
        particle_times=np.array(pt),
        particle_q=np.array(pq),
        particle_p=np.array(pp_),
        particle_qdot=np.zeros((len(pt), 3)),
        meta={"dt": cfg.dt, "kind": "linearized", "v1": v1.tolist()},
    )


def wave_group(f0: FieldPair, t: float, v=(0.0, 0.0, 0.0)) -> FieldPair:
    """W(t) of the modified wave equation F' = ((v.grad, 1), (Lap, v.grad)) F.

    v = 0 gives the free group W0(t).  Exact per mode at any t (one
    rotation, no stepping); the caller owns the wrap-horizon bookkeeping.
    """
    g = f0.grid
    v = np.asarray(v, dtype=float)
    w = g.kabs
    c = np.cos(w * t)
    s = np.sin(w * t)
    sinc = np.where(w > 0, s / np.where(w == 0, 1.0, w), t)
    psih, pih = f0.psi_hat, f0.pi_hat
    out_psi = c * psih + sinc * pih
    out_pi = -w * s * psih + c * pih
    if np.any(v != 0):
        drift = np.exp(-1j * g.kdotv(v) * t)
        out_psi = drift * out_psi
        out_pi = drift * out_pi
    return FieldPair.from_spectral(g, out_psi, out_pi, strict=False)
