"""Exact one-excitation dynamics on the discretized waveguide.

Two independent routes are provided: a fixed-step classical Runge-Kutta
integrator (:func:`evolve`) and a dense eigendecomposition
(:func:`evolve_eigenbasis`) used as a cross-check.  Both start from the
excited atom with an empty waveguide.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .core_model import SystemConfig, build_hamiltonian
from .errors import ConfigurationError, NonExponentialWindowError
from .trajectory import Trajectory

DEFAULT_DT = 0.01
SNAPSHOT_EVERY = 0.1
NORM_TOL = 1e-9
DENSE_LIMIT = 512
EIGEN_LIMIT = 4096


def _rk4_polynomial(A: np.ndarray) -> np.ndarray:
    """``I + A + A^2/2 + A^3/6 + A^4/24``, the RK4 amplification matrix for ``y' = (A/h) y``."""
    eye = np.eye(A.shape[0], dtype=complex)
    return eye + A @ (eye + A @ (eye + A @ (eye + A / 4) / 3) / 2)


def _spectral_radius_bound(cfg: SystemConfig) -> float:
    # Gershgorin: largest absolute row sum (a site row or the atom row).
    return max(2 * cfg.J + cfg.g, abs(cfg.omega_a) + cfg.L * cfg.g)


def _substeps_for(cfg: SystemConfig, dt: float, t_max: float, tol: float, max_halvings: int) -> int:
    """Smallest power-of-two split of ``dt`` whose predicted norm loss stays below ``tol / 2``.

    For Hermitian ``H`` one RK4 step shrinks the norm by ``(rho h)^6 / 72`` to
    leading order, with ``rho`` the spectral radius.
    """
    rho = _spectral_radius_bound(cfg)
    steps = max(1.0, t_max / dt)
    for k in range(max_halvings + 1):
        h = dt / 2**k
        if steps * 2**k * (rho * h) ** 6 / 72 <= tol / 2:
            return k
    return max_halvings


def evolve(
    cfg: SystemConfig,
    t_max: float,
    dt: float = DEFAULT_DT,
    *,
    snapshot_every: float | None = SNAPSHOT_EVERY,
    probes: Sequence[int] = (),
    norm_tol: float = NORM_TOL,
    max_halvings: int = 8,
) -> Trajectory:
    """Integrate ``i d/dt psi = H psi`` with classical RK4 from ``|e>|0>``.

    Output is sampled every ``dt``.  Internally each output step may be split
    into ``2^k`` RK4 substeps so that the accumulated norm drift stays within
    ``norm_tol``; the drift is verified at every stored step and ``k`` is
    raised and the run repeated if the check fails.

    ``probes`` lists site indices whose amplitude is recorded at every
    sample.  Full field snapshots are kept every ``snapshot_every``; with
    ``None`` only the final field is kept.
    """
    if t_max < 0:
        raise ConfigurationError("t_max must be non-negative")
    if not 0 < dt <= 0.1 / cfg.J + 1e-15:
        raise ConfigurationError(f"dt must lie in (0, 0.1/J]; got {dt!r}")
    n_steps = int(round(t_max / dt))
    if abs(n_steps * dt - t_max) > 1e-9 * max(1.0, t_max):
        raise ConfigurationError("t_max must be a multiple of dt")
    probes = tuple(int(p) for p in probes)
    for p in probes:
        if not 0 <= p < cfg.N:
            raise ConfigurationError(f"probe site {p} outside the chain")
    snap_stride = None
    if snapshot_every:
        snap_stride = max(1, int(round(snapshot_every / dt)))

    k = _substeps_for(cfg, dt, t_max, norm_tol, max_halvings)
    while True:
        eps, snaps, probe_data, drift = _run_rk4(cfg, n_steps, dt, k, snap_stride, probes)
        if drift <= norm_tol or k >= max_halvings:
            break
        k += 1

    traj = Trajectory(
        times=np.arange(n_steps + 1) * dt,
        eps=eps,
        solver_tag="lattice",
        t_max_valid=cfg.t_max_valid(),
        field_snapshots=snaps,
        probes=probe_data,
        config=cfg,
        meta={"dt": dt, "substeps": 2**k, "max_norm_drift": drift},
    )
    if drift > norm_tol:
        traj.warnings.append(f"norm drift {drift:.3g} exceeds {norm_tol:g} after {k} halvings")
    if t_max > traj.t_max_valid:
        traj.warnings.append(
            f"t_max = {t_max:g} exceeds the validity window {traj.t_max_valid:.4g}; "
            "later samples include returning wavefronts"
        )
    return traj


def _run_rk4(cfg, n_steps, dt, k, snap_stride, probes):
    dim = cfg.N + 1
    h = dt / 2**k
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    eps = np.empty(n_steps + 1, dtype=complex)
    eps[0] = 1.0
    probe_data = {p: np.empty(n_steps + 1, dtype=complex) for p in probes}
    for p in probes:
        probe_data[p][0] = 0.0
    snaps = [(0.0, psi[1:].copy())] if snap_stride else []
    drift = 0.0

    if dim <= DENSE_LIMIT + 1:
        P = _rk4_polynomial(-1j * h * build_hamiltonian(cfg))
        for _ in range(k):
            P = P @ P

        def step(y):
            return P @ y
    else:
        H = build_hamiltonian(cfg, sparse=True)
        A = (-1j * h) * H

        def step(y):
            for _ in range(2**k):
                k1 = A @ y
                k2 = A @ (y + k1 / 2)
                k3 = A @ (y + k2 / 2)
                k4 = A @ (y + k3)
                y = y + (k1 + 2 * k2 + 2 * k3 + k4) / 6
            return y

    for i in range(1, n_steps + 1):
        psi = step(psi)
        eps[i] = psi[0]
        for p in probes:
            probe_data[p][i] = psi[1 + p]
        drift = max(drift, abs(1.0 - float(np.vdot(psi, psi).real)))
        if snap_stride and (i % snap_stride == 0 or i == n_steps):
            snaps.append((i * dt, psi[1:].copy()))
    if not snap_stride:
        snaps.append((n_steps * dt, psi[1:].copy()))
    return eps, snaps, probe_data, drift


def evolve_eigenbasis(
    cfg: SystemConfig, times: Iterable[float], *, keep_field: bool = False
) -> Trajectory:
    """Exact propagation through a full eigendecomposition of ``H``.

    Refuses matrices larger than ``EIGEN_LIMIT``; use :func:`evolve` there.
    With ``keep_field`` every sample also stores the site amplitudes.
    """
    dim = cfg.N + 1
    if dim > EIGEN_LIMIT:
        raise ConfigurationError(
            f"dimension {dim} exceeds {EIGEN_LIMIT}; use lattice_sim.evolve for chains this long"
        )
    times = np.asarray(list(times), dtype=float)
    w, V = np.linalg.eigh(build_hamiltonian(cfg))
    weights = V[0].conj()  # <n|e>
    phases = np.exp(-1j * np.outer(times, w))
    amps = phases * weights[None, :]
    eps = amps @ V[0]
    snaps = []
    if keep_field:
        snaps = [(float(t), V[1:] @ a) for t, a in zip(times, amps)]
    return Trajectory(
        times=times,
        eps=eps,
        solver_tag="lattice",
        t_max_valid=cfg.t_max_valid(),
        field_snapshots=snaps,
        config=cfg,
        meta={"method": "eigenbasis"},
    )


def fit_decay_rate(
    traj: Trajectory, window: tuple[float, float], noise: float = 1e-3
) -> float:
    """Least-squares population rate ``-d log|eps|^2 / dt`` over ``window``.

    The population must not rise by more than ``noise`` between successive
    samples in the window; otherwise a revival is present and no single
    rate describes the data.
    """
    t0, t1 = window
    mask = (traj.times >= t0 - 1e-12) & (traj.times <= t1 + 1e-12)
    t = traj.times[mask]
    pop = traj.pop[mask]
    if t.size < 2:
        raise ValueError("fit window holds fewer than two samples")
    if np.any(np.diff(pop) > noise):
        raise NonExponentialWindowError("non-exponential window: population rises inside it")
    if np.any(pop <= 0):
        raise NonExponentialWindowError("non-exponential window: population reaches zero")
    slope = np.polyfit(t, np.log(pop), 1)[0]
    return float(-slope)
