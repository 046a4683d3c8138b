"""Emitted field at the coupling points of a two-leg atom.

With ``p = -i g e^{i phi_1} / v`` and ``eps_d(t) = Theta(t - t_d) eps(t - t_d)``
the closed-form components are

    c1_b_exp = p eps              c1_b_del = 2 p e^{i(phi_WG + phi_c)} eps_d
    c1_f_exp = p eps
    c2_b_exp = p e^{i phi_c} eps
    c2_f_exp = p e^{i phi_c} eps  c2_f_del = 2 p e^{i phi_WG} eps_d

Subscript 1/2 labels the leg, ``b``/``f`` the backward (left-moving) and
forward (right-moving) parts.  The delay parts carry the factor 2 of a
symmetric step function evaluated on the leg itself.  The wave that has left
the atom (one site beyond the outer legs) sees the right-continuous step
instead, i.e. half of the delay part; :meth:`FieldComponents.outgoing_backward`
and :meth:`FieldComponents.outgoing_forward` return that combination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import SystemConfig
from .errors import ConfigurationError, GridAlignmentError
from .trajectory import Trajectory, atomic_write

COMPONENT_NAMES = ("c1_b_exp", "c1_b_del", "c1_f_exp", "c2_b_exp", "c2_f_exp", "c2_f_del")
LINEARIZATION_BUDGET = 5e-2


@dataclass
class FieldComponents:
    times: np.ndarray
    c1_b_exp: np.ndarray
    c1_b_del: np.ndarray
    c1_f_exp: np.ndarray
    c2_b_exp: np.ndarray
    c2_f_exp: np.ndarray
    c2_f_del: np.ndarray
    config: SystemConfig | None = field(default=None, repr=False)

    @property
    def c1_b(self) -> np.ndarray:
        return self.c1_b_exp + self.c1_b_del

    @property
    def c2_f(self) -> np.ndarray:
        return self.c2_f_exp + self.c2_f_del

    @property
    def c1(self) -> np.ndarray:
        """Total amplitude on leg 1: forward plus backward."""
        return self.c1_f_exp + self.c1_b

    @property
    def c2(self) -> np.ndarray:
        return self.c2_f + self.c2_b_exp

    def outgoing_backward(self) -> np.ndarray:
        """Left-moving wave leaving leg 1 towards smaller ``x``."""
        return self.c1_b_exp + self.c1_b_del / 2

    def outgoing_forward(self) -> np.ndarray:
        """Right-moving wave leaving leg 2 towards larger ``x``."""
        return self.c2_f_exp + self.c2_f_del / 2

    def to_csv(self, path=None) -> str:
        lines = ["t," + ",".join(f"re_{n},im_{n}" for n in COMPONENT_NAMES)]
        cols = [getattr(self, n) for n in COMPONENT_NAMES]
        for i, t in enumerate(self.times):
            vals = [repr(float(t))]
            for c in cols:
                vals += [repr(float(c[i].real)), repr(float(c[i].imag))]
            lines.append(",".join(vals))
        text = "\n".join(lines) + "\n"
        if path is not None:
            atomic_write(path, text)
        return text


def _delay_steps(times: np.ndarray, t_d: float) -> int:
    if times.size < 2:
        raise GridAlignmentError("need at least two samples")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12):
        raise GridAlignmentError("history must be uniformly sampled")
    shift = t_d / dt
    n = int(round(shift))
    if abs(shift - n) > 1e-9 * max(1.0, shift):
        raise GridAlignmentError(f"delay {t_d!r} is not a multiple of the step {dt!r}")
    return n


def field_at_coupling_points(eps_history: Trajectory, cfg: SystemConfig) -> FieldComponents:
    """Evaluate the six closed-form components from a sampled ``eps(t)``."""
    if cfg.L != 2:
        raise ConfigurationError("field decomposition is for two legs")
    dc = cfg.derived()
    eps = eps_history.eps
    n = _delay_steps(eps_history.times, dc.t_d)
    eps_d = np.zeros_like(eps)
    if n < eps.size:
        eps_d[n:] = eps[: eps.size - n]
    p = -1j * cfg.g * np.exp(1j * cfg.phases[0]) / dc.v
    ec = np.exp(1j * dc.phi_c)
    ew = np.exp(1j * dc.phi_WG)
    return FieldComponents(
        times=eps_history.times.copy(),
        c1_b_exp=p * eps,
        c1_b_del=2 * p * ew * ec * eps_d,
        c1_f_exp=p * eps,
        c2_b_exp=p * ec * eps,
        c2_f_exp=p * ec * eps,
        c2_f_del=2 * p * ew * eps_d,
        config=cfg,
    )


def delay_feedback_amplitude(components: FieldComponents, cfg: SystemConfig, t: float) -> complex:
    """Delayed light returning to the atom, ``c1_b_del e^{-i phi_1} + c2_f_del e^{-i phi_2}``.

    Equals ``-4 i (g / v) cos(phi_c) e^{i phi_WG} eps(t - t_d)``.
    """
    dc = cfg.derived()
    if t < dc.t_d - 1e-12:
        raise ValueError("feedback amplitude is defined for t >= t_d")
    i = int(np.argmin(np.abs(components.times - t)))
    if abs(components.times[i] - t) > 1e-9 * max(1.0, t):
        raise GridAlignmentError(f"t = {t!r} is not on the component grid")
    phi1, phi2 = cfg.phases
    return complex(
        components.c1_b_del[i] * np.exp(-1j * phi1) + components.c2_f_del[i] * np.exp(-1j * phi2)
    )


@dataclass(frozen=True)
class FieldComparison:
    max_deviation: float
    budget: float
    deviation_backward: float
    deviation_forward: float

    @property
    def within_budget(self) -> bool:
        return self.max_deviation <= self.budget


def probe_sites(cfg: SystemConfig) -> tuple[int, int]:
    """Sites one step outside the legs where only outgoing light is present."""
    return cfg.positions[0] - 1, cfg.positions[-1] + 1


def compare_with_lattice_field(
    traj_lattice: Trajectory,
    components: FieldComponents,
    window: tuple[float, float],
) -> FieldComparison:
    """Max deviation of the lattice probes from the closed-form outgoing waves.

    The probes sit at ``x_1 - 1`` and ``x_2 + 1``; light needs ``1 / v`` to
    hop there and picks up the propagation phase ``e^{i k_a}``.  The budget
    is ``5e-2 g / v``.
    """
    cfg = components.config or traj_lattice.config
    if cfg is None:
        raise ValueError("need the system config")
    left, right = probe_sites(cfg)
    if left not in traj_lattice.probes or right not in traj_lattice.probes:
        raise ValueError(f"lattice run lacks field records at probe sites {left}, {right}")
    dc = cfg.derived()
    if traj_lattice.times.size != components.times.size or not np.allclose(
        traj_lattice.times, components.times
    ):
        raise GridAlignmentError("lattice and component grids differ")
    hop = _delay_steps(traj_lattice.times, 1.0 / dc.v)
    phase = np.exp(1j * dc.k_a)
    t = traj_lattice.times
    mask = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12) & traj_lattice.valid_mask()
    mask[:hop] = False
    idx = np.flatnonzero(mask)
    pred_b = phase * components.outgoing_backward()[idx - hop]
    pred_f = phase * components.outgoing_forward()[idx - hop]
    dev_b = float(np.max(np.abs(traj_lattice.probes[left][idx] - pred_b)))
    dev_f = float(np.max(np.abs(traj_lattice.probes[right][idx] - pred_f)))
    return FieldComparison(
        max_deviation=max(dev_b, dev_f),
        budget=LINEARIZATION_BUDGET * cfg.g / dc.v,
        deviation_backward=dev_b,
        deviation_forward=dev_f,
    )
