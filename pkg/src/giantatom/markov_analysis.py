"""Analytic Markovianity tools.

Rates follow one bookkeeping rule throughout: :func:`lindblad_rate` returns a
population rate, and :func:`markovianity_deviation` takes an amplitude rate
(half the population rate).
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import root

from .dde_engine import phase_overlap_sums
from .errors import ConfigurationError, RootFindingError
from .trajectory import Trajectory

MARKOV_TOL = 1e-12
MAX_SOLVER_L = 12


@dataclass(frozen=True)
class PhaseVector:
    phases: tuple[float, ...]
    residuals: np.ndarray = field(compare=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.phases) < 2:
            raise ConfigurationError("a phase vector needs at least two legs")
        if len(self.residuals) != len(self.phases) - 1:
            raise ValueError("residual vector must have length L - 1")

    @classmethod
    def from_phases(cls, phases: Sequence[float]) -> "PhaseVector":
        phases = tuple(float(p) for p in phases)
        return cls(phases, markov_residuals(phases))

    @property
    def L(self) -> int:
        return len(self.phases)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    @property
    def is_markovian(self) -> bool:
        return self.max_residual <= MARKOV_TOL


def lindblad_rate(Gamma: float, phi_c: float, k_a: float, d: float) -> float:
    """Master-equation population rate ``Gamma [1 + cos(phi_c) cos(k_a d)]``."""
    return Gamma * (1.0 + math.cos(phi_c) * math.cos(k_a * d))


def markov_residuals(phases: Sequence[float]) -> np.ndarray:
    """``sum_{j=1}^{L-n} cos(phi_{n+j} - phi_j)`` for ``n = 1 .. L-1``."""
    return phase_overlap_sums(phases)


# --- phase solver ---------------------------------------------------------
#
# Equations are processed from n = L-1 down to 1.  Equation n is the first
# to involve legs L-n and n+1 (1-based) at their outermost pairing, so each
# introduces at most two new unknowns.  n = L-1 fixes phi_L = pi/2.  When one
# new unknown appears it is solved in closed form (the equation is a single
# sinusoid in it); when two appear the first is a shooting parameter and the
# second is solved; when none appear the equation becomes a residual that the
# shooting parameters must drive to zero.


def _wrap(x: float) -> float:
    """Map onto ``(-pi, pi]``."""
    y = math.pi - math.fmod(math.pi - x, 2 * math.pi)
    if y <= -math.pi:
        y += 2 * math.pi
    return y


@lru_cache(maxsize=None)
def _plan(L: int) -> tuple[tuple, ...]:
    known = {0, L - 1}
    steps = []
    for n in range(L - 2, 0, -1):
        a, b = L - n - 1, n
        new = [i for i in dict.fromkeys((a, b)) if i not in known]
        if len(new) == 2:
            steps.append(("shoot", n, a, b))
        elif len(new) == 1:
            steps.append(("solve", n, new[0]))
        else:
            steps.append(("resid", n))
        known.update(new)
    return tuple(steps)


def _solve_single(ph: list, n: int, b: int, L: int) -> float | None:
    """Root of equation ``n`` in the unknown ``ph[b]`` of smallest modulus (ties: positive)."""
    A = 0j
    C = 0.0
    for j in range(L - n):
        lo, hi = j, j + n
        if hi == b:
            A += cmath.exp(-1j * ph[lo])
        elif lo == b:
            A += cmath.exp(-1j * ph[hi])
        else:
            C += math.cos(ph[hi] - ph[lo])
    mod = abs(A)
    if mod < 1e-14 or abs(C) > mod:
        return None
    base = -cmath.phase(A)
    spread = math.acos(max(-1.0, min(1.0, -C / mod)))
    roots = [_wrap(base + spread), _wrap(base - spread)]
    return min(roots, key=lambda r: (round(abs(r), 12), -r))


def _forward(L: int, shoot: Sequence[float]) -> tuple[list, list] | None:
    ph = [math.nan] * L
    ph[0] = 0.0
    ph[L - 1] = math.pi / 2
    it = iter(shoot)
    resid = []
    for step in _plan(L):
        kind, n = step[0], step[1]
        if kind == "resid":
            resid.append(sum(math.cos(ph[j + n] - ph[j]) for j in range(L - n)))
            continue
        if kind == "shoot":
            ph[step[2]] = float(next(it))
            b = step[3]
        else:
            b = step[2]
        root_b = _solve_single(ph, n, b, L)
        if root_b is None:
            return None
        ph[b] = root_b
    return ph, resid


def _snap(phases: list[float], max_den: int = 8, tol: float = 1e-8) -> list[float]:
    """Replace near-rational multiples of pi by their exact value if the residual stays small.

    ``tol`` is loose because double roots (``acos`` near +-1) turn a 1e-16
    residual into a phase error of order 1e-8; the residual check decides.
    """
    out = list(phases)
    for i, p in enumerate(phases):
        frac = Fraction(p / math.pi).limit_denominator(max_den)
        exact = float(frac) * math.pi
        if abs(exact - p) <= tol:
            trial = out.copy()
            trial[i] = exact
            if np.max(np.abs(markov_residuals(trial))) <= MARKOV_TOL:
                out = trial
    return out


@lru_cache(maxsize=None)
def _solve_cached(L: int) -> tuple[float, ...]:
    if L == 2:
        return (0.0, math.pi / 2)
    steps = _plan(L)
    k = sum(s[0] == "shoot" for s in steps)
    if k == 0:
        out = _forward(L, ())
        if out is None:
            raise RootFindingError(f"L={L}: closed-form back-substitution failed", {0: 0.0, L - 1: math.pi / 2})
        return tuple(_snap(out[0]))

    def residual(x):
        out = _forward(L, x)
        return np.asarray(out[1]) if out is not None else np.full(k, 10.0)

    grid = np.linspace(-math.pi, math.pi, 7)[1:]
    found = []
    best_partial: dict[int, float] = {0: 0.0, L - 1: math.pi / 2}
    for x0 in itertools.product(grid, repeat=k):
        sol = root(residual, np.array(x0), method="hybr", options={"xtol": 1e-15})
        x = [_wrap(v) for v in sol.x]
        out = _forward(L, x)
        if out is None:
            continue
        if max((abs(r) for r in out[1]), default=0.0) < MARKOV_TOL:
            found.append((x, out[0]))
    if not found:
        raise RootFindingError(f"L={L}: no shooting start converged", best_partial)
    found.sort(key=lambda s: tuple(v for r in s[0] for v in (round(abs(r), 9), -r)))
    return tuple(_snap(found[0][1]))


def solve_markov_phases(L: int) -> PhaseVector:
    """Canonical solution of the Markov phase conditions for ``L`` legs.

    ``phi_1 = 0`` and ``phi_L = pi/2``; the remaining phases come from
    back-substitution, preferring the root of smallest modulus in
    ``(-pi, pi]`` at each closed-form step.  Where a step introduces two
    unknowns, the free one is fixed by a multi-start root search and the
    lexicographically smallest (by modulus) solution is kept.
    """
    if not 2 <= L <= MAX_SOLVER_L:
        raise ConfigurationError(f"L must lie in [2, {MAX_SOLVER_L}]")
    phases = _solve_cached(int(L))
    pv = PhaseVector.from_phases(phases)
    if not pv.is_markovian:
        raise RootFindingError(
            f"L={L}: residual {pv.max_residual:.3g} above tolerance", dict(enumerate(phases))
        )
    return pv


def markovianity_deviation(
    traj: Trajectory, amplitude_rate: float, t_max: float | None = None
) -> float:
    """``max_t | |eps(t)| - exp(-rate t) |`` over the trajectory's validity window."""
    mask = traj.valid_mask(t_max)
    t = traj.times[mask]
    return float(np.max(np.abs(np.abs(traj.eps[mask]) - np.exp(-amplitude_rate * t))))
