"""Collision-model solver on right- and left-moving time-bin chains.

At collision ``n`` the atom meets, for each leg ``j = 1 .. L``, the right bin
``n - (j-1) l`` with weight ``e^{i phi_j} e^{-i (j-1) phi_WG}`` and the left bin
``n + (j-1) l`` with weight ``e^{i phi_j} e^{+i (j-1) phi_WG}``, where
``l = t_d / dt``.  The collision Hamiltonian is
``kappa (sigma^+ sum_i c_i b_i + h.c.)`` with ``kappa = g / sqrt(v dt)``.

In the one-excitation sector it only mixes the atom with the bright bin mode
``|B> = c^* / |c|``, so the exact propagator is a rotation by
``theta = kappa |c| dt`` in the plane ``{|e>, |B>}``.  The chain shift is done
by index arithmetic: bin arrays are allocated once and never moved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import SystemConfig
from .errors import ConfigurationError, PrematureCallError
from .trajectory import Trajectory

MAX_BINS = 20_000_000
DECAYED_POP = 1e-3


@dataclass
class BinChainState:
    """Atom amplitude and both bin chains.

    ``right_bins[k]`` holds right bin ``k - (L-1) l`` (bins with negative label
    are fresh vacuum bins still to be revisited); ``left_bins[k]`` holds left
    bin ``k``.
    """

    eps: complex
    right_bins: np.ndarray = field(repr=False)
    left_bins: np.ndarray = field(repr=False)
    step_index: int
    ell: int
    dt: float
    right_coeffs: np.ndarray = field(repr=False)
    left_coeffs: np.ndarray = field(repr=False)
    norm: float = 1.0

    @classmethod
    def initial(
        cls, phases, phi_WG: float, ell: int, dt: float, n_steps: int
    ) -> "BinChainState":
        if int(ell) != ell or ell < 1:
            raise ConfigurationError("bin delay l must be a positive integer")
        phases = np.asarray(phases, dtype=float)
        L = phases.size
        span = (L - 1) * ell
        size = n_steps + span
        if 2 * size > MAX_BINS:
            raise MemoryError(
                f"{2 * size} bins exceed the limit of {MAX_BINS}; shorten t_max or enlarge dt"
            )
        j = np.arange(L)
        return cls(
            eps=1.0 + 0j,
            right_bins=np.zeros(size, dtype=complex),
            left_bins=np.zeros(size, dtype=complex),
            step_index=0,
            ell=int(ell),
            dt=float(dt),
            right_coeffs=np.exp(1j * (phases - j * phi_WG)),
            left_coeffs=np.exp(1j * (phases + j * phi_WG)),
        )

    @property
    def L(self) -> int:
        return self.right_coeffs.size

    def participating(self) -> tuple[np.ndarray, np.ndarray]:
        """Array indices of the right and left bins touched by the next collision."""
        j = np.arange(self.L)
        offset = (self.L - 1) * self.ell
        n = self.step_index
        return n - j * self.ell + offset, n + j * self.ell

    def total_norm(self) -> float:
        return (
            abs(self.eps) ** 2
            + float(np.vdot(self.right_bins, self.right_bins).real)
            + float(np.vdot(self.left_bins, self.left_bins).real)
        )


def collide_step(state: BinChainState, kappa: float) -> BinChainState:
    """Apply one exact collision unitary and advance to the next bin.

    Works in place and returns ``state``.  ``state.norm`` is updated from
    the local subspace only, so per-step norm tracking costs ``O(L)``.
    """
    ri, li = state.participating()
    if ri[-1] < 0 or li[-1] >= state.left_bins.size:
        raise IndexError("bin chains exhausted; allocate more steps")
    beta_r = state.right_bins[ri]
    beta_l = state.left_bins[li]
    cr = state.right_coeffs
    cl = state.left_coeffs
    C = math.sqrt(float(np.sum(np.abs(cr) ** 2) + np.sum(np.abs(cl) ** 2)))
    before = abs(state.eps) ** 2 + float(np.sum(np.abs(beta_r) ** 2) + np.sum(np.abs(beta_l) ** 2))
    overlap = (np.dot(cr, beta_r) + np.dot(cl, beta_l)) / C  # <B|beta>
    theta = kappa * C * state.dt
    c, s = math.cos(theta), math.sin(theta)
    eps = state.eps
    new_eps = c * eps - 1j * s * overlap
    shift = (c - 1.0) * overlap - 1j * s * eps
    new_r = beta_r + shift * np.conj(cr) / C
    new_l = beta_l + shift * np.conj(cl) / C
    state.right_bins[ri] = new_r
    state.left_bins[li] = new_l
    state.eps = new_eps
    after = abs(new_eps) ** 2 + float(np.sum(np.abs(new_r) ** 2) + np.sum(np.abs(new_l) ** 2))
    state.norm += after - before
    state.step_index += 1
    return state


def collision_unitary(state: BinChainState, kappa: float) -> np.ndarray:
    """Dense matrix of the collision Hamiltonian on ``{atom, right bins, left bins}``.

    Used only to cross-check :func:`collide_step` against a generic matrix
    exponential.
    """
    coeffs = np.concatenate((state.right_coeffs, state.left_coeffs))
    dim = 1 + coeffs.size
    H = np.zeros((dim, dim), dtype=complex)
    H[0, 1:] = kappa * coeffs
    H[1:, 0] = kappa * np.conj(coeffs)
    return H


def run_collisions(
    cfg: SystemConfig, t_max: float, dt: float, *, keep_state: bool = False
) -> Trajectory:
    """Collision-model trajectory sampled after every collision."""
    if t_max < 0:
        raise ConfigurationError("t_max must be non-negative")
    dc = cfg.derived()
    if cfg.L > 1:
        ratio = dc.t_d / dt
        ell = int(round(ratio))
        if ell < 1 or abs(ratio - ell) > 1e-9 * max(1.0, ratio):
            raise ConfigurationError(f"dt = {dt!r} does not divide the delay t_d = {dc.t_d!r}")
    else:
        ell = 1
    n_steps = int(math.ceil(t_max / dt - 1e-9))
    kappa = cfg.g / math.sqrt(dc.v * dt)
    state = BinChainState.initial(cfg.phases, dc.phi_WG, ell, dt, n_steps)
    eps = np.empty(n_steps + 1, dtype=complex)
    eps[0] = state.eps
    drift = 0.0
    for i in range(n_steps):
        collide_step(state, kappa)
        eps[i + 1] = state.eps
        drift = max(drift, abs(1.0 - state.norm))
    meta = {"dt": dt, "ell": ell, "kappa": kappa, "max_norm_drift": drift}
    if keep_state:
        meta["_state"] = state
        meta["_payload"] = {
            "bins": {
                "right_offset": (state.L - 1) * ell,
                "re_right": state.right_bins.real.tolist(),
                "im_right": state.right_bins.imag.tolist(),
                "re_left": state.left_bins.real.tolist(),
                "im_left": state.left_bins.imag.tolist(),
            }
        }
    return Trajectory(
        times=np.arange(n_steps + 1) * dt,
        eps=eps,
        solver_tag="collision",
        config=cfg,
        meta=meta,
    )


@dataclass(frozen=True)
class BeamSplitterMap:
    """Two-mode transfer matrix relating delayed and undelayed bins."""

    phi_c: float
    phi_WG: float

    @property
    def matrix(self) -> np.ndarray:
        a = np.exp(1j * (self.phi_c - self.phi_WG))
        b = np.exp(1j * (self.phi_c + self.phi_WG))
        return np.array([[1.0, a], [b, 1.0]], dtype=complex) / math.sqrt(2)

    def unitarity_deviation(self) -> float:
        M = self.matrix
        return float(np.max(np.abs(M @ M.conj().T - np.eye(2))))


def unitarity_deviation(phi_c: float, phi_WG: float) -> float:
    """Max-entry norm of ``M M^dag - I``; equals ``|cos phi_c|``."""
    return BeamSplitterMap(phi_c, phi_WG).unitarity_deviation()


def chirality_coefficients(phi_c: float) -> tuple[complex, complex]:
    """Right and left bin weights ``(1 - i e^{i phi_c}, 1 + i e^{i phi_c})`` for ``phi_WG = pi/2``, ``l -> 0``."""
    z = 1j * np.exp(1j * phi_c)
    return complex(1 - z), complex(1 + z)


def emission_fractions(obj, threshold: float = DECAYED_POP) -> tuple[float, float]:
    """Forward (right-moving) and backward (left-moving) emitted fractions.

    Accepts a lattice :class:`Trajectory` with field snapshots, a collision
    trajectory run with ``keep_state=True``, or a :class:`BinChainState`.
    On the lattice the field to the right of the last leg counts as forward
    and the field to the left of the first leg as backward.  On a ring the
    exterior is split at the point opposite the atom.  Light still between
    the legs is shared equally.
    """
    if isinstance(obj, Trajectory) and obj.solver_tag == "collision":
        obj = obj.meta.get("_state")
        if obj is None:
            raise ValueError("collision trajectory was run without keep_state=True")
    if isinstance(obj, BinChainState):
        if abs(obj.eps) ** 2 >= threshold:
            raise PrematureCallError(f"atom not yet decayed: |eps|^2 = {abs(obj.eps) ** 2:.3g}")
        fwd = float(np.vdot(obj.right_bins, obj.right_bins).real)
        bwd = float(np.vdot(obj.left_bins, obj.left_bins).real)
        return fwd, bwd
    if not isinstance(obj, Trajectory) or obj.config is None:
        raise TypeError("expected a lattice Trajectory with config or a BinChainState")
    t, field_ = obj.last_snapshot()
    idx = int(np.argmin(np.abs(obj.times - t)))
    if abs(obj.eps[idx]) ** 2 >= threshold:
        raise PrematureCallError(f"atom not yet decayed: |eps|^2 = {abs(obj.eps[idx]) ** 2:.3g}")
    return split_field(obj.config, field_)


def split_field(cfg: SystemConfig, field_: np.ndarray) -> tuple[float, float]:
    x1, xL, N = cfg.positions[0], cfg.positions[-1], cfg.N
    x = np.arange(N)
    weight = np.abs(field_) ** 2
    inside = (x >= x1) & (x <= xL)
    if cfg.boundary == "ring":
        ahead = np.mod(x - xL, N)
        behind = np.mod(x1 - x, N)
        fwd_mask = ~inside & (ahead < behind)
        bwd_mask = ~inside & ~fwd_mask
    else:
        fwd_mask = x > xL
        bwd_mask = x < x1
    shared = 0.5 * float(weight[inside].sum())
    return float(weight[fwd_mask].sum()) + shared, float(weight[bwd_mask].sum()) + shared
