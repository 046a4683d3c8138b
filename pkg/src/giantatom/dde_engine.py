"""Delay differential equations for the atomic amplitude of a giant atom.

For ``L`` equally spaced legs the amplitude obeys

    d eps/dt = -(L Gamma / 4) eps(t) + sum_{n=1}^{L-1} b_n Theta(t - n t_d) eps(t - n t_d)

with ``b_n = -(Gamma / 2) S_n exp(i n phi_WG)`` and
``S_n = sum_{j=1}^{L-n} cos(phi_{n+j} - phi_j)``.  Two legs reduce to
``b_1 = -(Gamma / 2) cos(phi_c) exp(i phi_WG)``.  (``Gamma / 4 = g^2 / v``.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_model import SystemConfig
from .errors import ConfigurationError, PoleError
from .trajectory import Trajectory

MIN_SUBSTEPS = 50
DEFAULT_SUBSTEPS = 100
POLE_TOL = 1e-12


def phase_overlap_sums(phases: Sequence[float]) -> np.ndarray:
    """``S_n`` for ``n = 1 .. L-1``."""
    ph = np.asarray(phases, dtype=float)
    L = ph.size
    return np.array([np.cos(ph[n:] - ph[: L - n]).sum() for n in range(1, L)])


@dataclass(frozen=True)
class DdeSpec:
    Gamma: float
    phases: tuple[float, ...]
    phi_WG: float
    t_d: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        if self.Gamma < 0:
            raise ConfigurationError("Gamma must be non-negative")
        if not self.phases:
            raise ConfigurationError("need at least one leg")
        if self.L > 1 and self.t_d <= 0:
            raise ConfigurationError("a multi-leg atom needs a positive delay")

    @classmethod
    def two_leg(cls, Gamma: float, phi_c: float, phi_WG: float, t_d: float) -> "DdeSpec":
        return cls(Gamma, (0.0, phi_c), phi_WG, t_d)

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "DdeSpec":
        dc = cfg.derived()
        return cls(dc.Gamma, cfg.phases, dc.phi_WG, dc.t_d)

    @property
    def L(self) -> int:
        return len(self.phases)

    @property
    def phi_c(self) -> float:
        if self.L != 2:
            raise ConfigurationError("phi_c is defined for two legs only")
        return self.phases[1] - self.phases[0]

    @property
    def instantaneous_rate(self) -> float:
        """Amplitude decay rate without feedback, ``L g^2 / v``."""
        return self.L * self.Gamma / 4

    @property
    def delay_coefficients(self) -> np.ndarray:
        """``b_n`` multiplying ``eps(t - n t_d)`` for ``n = 1 .. L-1``."""
        S = phase_overlap_sums(self.phases)
        n = np.arange(1, self.L)
        return -(self.Gamma / 2) * S * np.exp(1j * n * self.phi_WG)


def integrate(
    spec: DdeSpec,
    t_max: float,
    substeps_per_delay: int = DEFAULT_SUBSTEPS,
    *,
    dt: float | None = None,
) -> Trajectory:
    """Fourth-order method-of-steps integration from ``eps(0) = 1``.

    The step is ``h = t_d / substeps_per_delay`` so every delay lands on the
    grid.  The four Runge-Kutta stage states of each step are kept in a ring
    buffer; the delayed term of stage ``s`` at step ``i`` reads stage ``s`` of
    step ``i - n M``.  This is exactly RK4 applied to the chained system of
    the method of steps, so no history interpolation enters and the scheme
    keeps its fourth order.  The step function is taken right-continuous
    (``Theta = 1`` at the node ``t = n t_d``).

    A single-leg atom has no delay; pass ``dt`` to fix its step.
    """
    if t_max < 0:
        raise ConfigurationError("t_max must be non-negative")
    if spec.L == 1:
        h = dt if dt is not None else 0.01
        M = 0
    else:
        if substeps_per_delay < MIN_SUBSTEPS:
            raise ConfigurationError(f"substeps_per_delay must be at least {MIN_SUBSTEPS}")
        M = int(substeps_per_delay)
        h = spec.t_d / M
        if dt is not None and abs(dt - h) > 1e-12 * h:
            raise ConfigurationError(
                f"dt = {dt!r} does not divide the delay into {M} steps; no interpolation is done"
            )
    n_steps = int(math.ceil(t_max / h - 1e-9))
    a = -spec.instantaneous_rate
    b = spec.delay_coefficients
    lags = [(n + 1) * M for n in range(b.size)]
    R = max(lags, default=0)

    ring = np.zeros((max(R, 1), 4), dtype=complex)
    eps = np.empty(n_steps + 1, dtype=complex)
    eps[0] = 1.0
    y = 1.0 + 0j
    half = h / 2
    for i in range(n_steps):
        delayed = [0j, 0j, 0j, 0j]
        for bn, lag in zip(b, lags):
            j = i - lag
            if j >= 0:
                row = ring[j % R]
                delayed[0] += bn * row[0]
                delayed[1] += bn * row[1]
                delayed[2] += bn * row[2]
                delayed[3] += bn * row[3]
        y1 = y
        k1 = a * y1 + delayed[0]
        y2 = y + half * k1
        k2 = a * y2 + delayed[1]
        y3 = y + half * k2
        k3 = a * y3 + delayed[2]
        y4 = y + h * k3
        k4 = a * y4 + delayed[3]
        if R:
            slot = ring[i % R]
            slot[0], slot[1], slot[2], slot[3] = y1, y2, y3, y4
        y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        eps[i + 1] = y

    return Trajectory(
        times=np.arange(n_steps + 1) * h,
        eps=eps,
        solver_tag="dde",
        meta={"dt": h, "substeps_per_delay": M},
    )


def _multiple_of_pi(x: float, tol: float = 1e-9) -> int | None:
    m = round(x / math.pi)
    return int(m) if abs(x - m * math.pi) <= tol else None


def asymptotic_amplitude(spec: DdeSpec, tol: float = 1e-9) -> float:
    """Long-time amplitude ``(1 + Gamma t_d / 2)^{-1}`` when a trapped state exists, else 0.

    Non-zero iff ``phi_WG = m pi`` (``m >= 1``) and ``phi_c = (m + 1) pi`` mod ``2 pi``.
    """
    if spec.L != 2:
        raise ConfigurationError("the closed-form asymptote is for two legs")
    m = _multiple_of_pi(spec.phi_WG, tol)
    if m is None or m < 1:
        return 0.0
    k = _multiple_of_pi(spec.phi_c, tol)
    if k is None or (k - (m + 1)) % 2 != 0:
        return 0.0
    return 1.0 / (1.0 + spec.Gamma * spec.t_d / 2)


def laplace_transform_amplitude(spec: DdeSpec, s: complex) -> complex:
    """``eps~(s) = 1 / (s + L Gamma / 4 - sum_n b_n exp(-s n t_d))``."""
    n = np.arange(1, spec.L)
    den = s + spec.instantaneous_rate - np.sum(
        spec.delay_coefficients * np.exp(-s * n * spec.t_d)
    )
    if abs(den) < POLE_TOL:
        raise PoleError(f"pole: |denominator| = {abs(den):.3g} at s = {s!r}")
    return complex(1.0 / den)


def final_value(spec: DdeSpec, s: float = 1e-9) -> complex:
    """``s eps~(s)`` at small positive ``s``, the final-value estimate of ``eps(infinity)``."""
    return s * laplace_transform_amplitude(spec, s)
