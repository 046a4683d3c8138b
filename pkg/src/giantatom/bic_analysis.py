"""Bound states in the continuum of a two-leg giant atom.

A trapped state exists when the optical length is ``m pi`` and the coupling
phase difference is ``(m + 1) pi``.  Its photon is confined strictly between
the legs with profile ``c_x = eps (2 g e^{i phi_1} / v) sin(k_a (x - x_1))``
and atomic population ``1 / (1 + Gamma t_d / 2)``.  The profile is an exact
eigenvector of the lattice Hamiltonian, so checks here use machine-level
tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import SystemConfig, build_hamiltonian
from .errors import ConfigurationError, NoBoundStateError

EXTERIOR_TOL = 1e-10


def _is_multiple_of_pi(x: float, tol: float) -> int | None:
    m = round(x / math.pi)
    return int(m) if abs(x - m * math.pi) <= tol else None


def bic_exists(d: int, k_a: float, phi_c: float, tol: float = 1e-9) -> tuple[bool, int]:
    """``(True, m)`` iff ``k_a d = m pi`` with ``m >= 1`` and ``phi_c = (m + 1) pi`` mod ``2 pi``."""
    if not 0 < k_a < math.pi:
        raise ConfigurationError("k_a must lie in (0, pi)")
    m = _is_multiple_of_pi(k_a * d, tol)
    if m is None or m < 1:
        return False, 0
    k = _is_multiple_of_pi(phi_c, tol)
    if k is None or (k - (m + 1)) % 2 != 0:
        return False, m
    return True, m


def bic_distances(k_a: float, N: int, tol: float = 1e-9) -> list[tuple[int, int]]:
    """``(m, d)`` pairs with integer ``d = m pi / k_a`` for ``1 <= m <= floor(k_a N / 2 pi)``."""
    out = []
    for m in range(1, int(math.floor(k_a * N / (2 * math.pi))) + 1):
        d = m * math.pi / k_a
        if abs(d - round(d)) <= tol * max(1.0, d):
            out.append((m, int(round(d))))
    return out


@dataclass
class BicState:
    exists: bool
    m: int
    eps_pop: float
    eps: complex
    profile: np.ndarray = field(repr=False)
    energy: float

    def vector(self) -> np.ndarray:
        return np.concatenate(([self.eps], self.profile))

    @property
    def norm(self) -> float:
        return self.eps_pop + float(np.sum(np.abs(self.profile) ** 2))


def build_bic(cfg: SystemConfig) -> BicState:
    """Closed-form trapped state; ``g = 0`` gives the bare excited atom."""
    if cfg.L != 2:
        raise ConfigurationError("closed-form trapped state is for two legs")
    dc = cfg.derived()
    if cfg.g == 0:
        return BicState(True, 0, 1.0, 1.0 + 0j, np.zeros(cfg.N, dtype=complex), cfg.omega_a)
    ok, m = bic_exists(cfg.d, dc.k_a, dc.phi_c)
    if not ok:
        raise NoBoundStateError("no bound state at these phases")
    eps_pop = 1.0 / (1.0 + dc.Gamma * dc.t_d / 2)
    eps = math.sqrt(eps_pop)
    x1, x2 = cfg.positions
    prefactor = eps * 2 * cfg.g * np.exp(1j * cfg.phases[0]) / dc.v
    profile = np.zeros(cfg.N, dtype=complex)
    inner = np.arange(x1 + 1, x2)
    profile[inner] = prefactor * np.sin(dc.k_a * (inner - x1))
    return BicState(True, m, eps_pop, complex(eps), profile, cfg.omega_a)


@dataclass
class BicReport:
    success: bool
    message: str
    eigenvalue_error: float = math.nan
    infidelity: float = math.nan
    exterior_weight: float = math.nan
    candidates: int = 0

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "message": self.message,
            "eigenvalue_error": self.eigenvalue_error,
            "infidelity": self.infidelity,
            "exterior_weight": self.exterior_weight,
            "candidates": self.candidates,
        }


def _exterior_mask(cfg: SystemConfig) -> np.ndarray:
    x = np.arange(cfg.N)
    return (x <= cfg.positions[0]) | (x >= cfg.positions[-1])


def verify_bic_numerically(cfg: SystemConfig, tol: float = 1e-8) -> BicReport:
    """Diagonalize the lattice Hamiltonian and look for the trapped state.

    Eigenvectors with eigenvalue within ``tol`` of ``omega_a`` form the
    candidate cluster.  When the closed form exists the report gives
    ``1 - |<P psi_analytic>|^2`` with ``P`` the projector on the cluster.
    Otherwise success requires a candidate with atomic weight and no field
    at or outside the legs, which a missing trapped state cannot supply.
    """
    w, V = np.linalg.eigh(build_hamiltonian(cfg))
    near = np.flatnonzero(np.abs(w - cfg.omega_a) <= tol)
    if near.size == 0:
        return BicReport(False, f"no eigenvalue within {tol:g} of omega_a")
    cluster = V[:, near]
    ext = _exterior_mask(cfg)
    ext_weights = np.array([np.sum(np.abs(cluster[1:, i][ext]) ** 2) for i in range(near.size)])
    try:
        analytic = build_bic(cfg)
    except NoBoundStateError:
        trapped = [i for i in range(near.size)
                   if ext_weights[i] <= EXTERIOR_TOL and abs(cluster[0, i]) ** 2 > EXTERIOR_TOL]
        if trapped:
            i = trapped[0]
            return BicReport(True, "trapped eigenstate found without a closed form",
                             float(abs(w[near[i]] - cfg.omega_a)), math.nan,
                             float(ext_weights[i]), near.size)
        return BicReport(False, "no eigenstate with zero exterior weight",
                         float(np.min(np.abs(w[near] - cfg.omega_a))), math.nan,
                         float(np.min(ext_weights)), near.size)
    psi = analytic.vector()
    amps = cluster.conj().T @ psi
    overlap2 = float(np.sum(np.abs(amps) ** 2))
    best = int(np.argmax(np.abs(amps)))
    projected = cluster @ amps
    ext_weight = float(np.sum(np.abs(projected[1:][ext]) ** 2) / max(overlap2, 1e-300))
    infidelity = max(0.0, 1.0 - overlap2)
    return BicReport(
        success=infidelity <= 1e-6,
        message="analytic state reproduced" if infidelity <= 1e-6 else "overlap too small",
        eigenvalue_error=float(abs(w[near[best]] - cfg.omega_a)),
        infidelity=infidelity,
        exterior_weight=ext_weight,
        candidates=near.size,
    )


def eigen_residual(cfg: SystemConfig, state: BicState) -> float:
    """``|| H psi - E psi ||`` for the closed-form state."""
    psi = state.vector()
    return float(np.linalg.norm(build_hamiltonian(cfg) @ psi - state.energy * psi))
