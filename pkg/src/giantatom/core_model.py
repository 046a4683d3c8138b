"""Physical configuration and single-excitation Hamiltonian.

Basis convention used by every solver: index 0 is the excited atom
``|e>|0>``, index ``1 + x`` is one photon on resonator ``x`` with the atom in
``|g>``.  The interaction ``g sigma (sum_j e^{i phi_j} a^dag_{x_j}) + h.c.``
puts ``g e^{i phi_j}`` in the (site ``x_j``, atom) entry and its conjugate
``g e^{-i phi_j}`` in the (atom, site ``x_j``) entry.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError

BOUNDARIES = ("ring", "open-chain")
WEAK_COUPLING_THRESHOLD = 0.5

_PHASE_RE = re.compile(
    r"^\s*(?P<sign>[+-])?\s*(?P<num>\d+(?:\.\d*)?)?\s*\*?\s*pi\s*(?:/\s*(?P<den>\d+))?\s*$"
)


def parse_phase(value: float | int | str) -> float:
    """Parse a phase given in radians or as a rational multiple of pi.

    Accepted strings: ``"pi/2"``, ``"-pi/4"``, ``"3*pi/2"``, ``"3pi/4"``,
    ``"pi"``, or any plain decimal such as ``"0.25"``.
    """
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower()
    match = _PHASE_RE.match(text)
    if match:
        num = float(match["num"]) if match["num"] else 1.0
        den = float(match["den"]) if match["den"] else 1.0
        sign = -1.0 if match["sign"] == "-" else 1.0
        return sign * num * math.pi / den
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"cannot parse phase {value!r}") from None


def format_phase(phi: float, max_den: int = 8, tol: float = 1e-9) -> str:
    """Render ``phi`` as ``p*pi/q`` when it is within ``tol`` of one (q <= max_den)."""
    ratio = phi / math.pi
    frac = Fraction(ratio).limit_denominator(max_den)
    if abs(ratio - float(frac)) * math.pi <= tol:
        p, q = frac.numerator, frac.denominator
        if p == 0:
            return "0"
        head = {1: "pi", -1: "-pi"}.get(p, f"{p}*pi")
        return head if q == 1 else f"{head}/{q}"
    return repr(float(phi))


@dataclass(frozen=True)
class DerivedConstants:
    """Quantities that follow from a :class:`SystemConfig`; never stored on it."""

    k_a: float
    v: float
    Gamma: float
    t_d: float
    phi_WG: float
    phi_c: float


@dataclass(frozen=True)
class SystemConfig:
    """Waveguide plus giant-atom parameters (energies in units of ``J``)."""

    J: float = 1.0
    g: float = 0.2
    omega_a: float = 0.0
    N: int = 90
    coupling_points: tuple[tuple[int, float], ...] = ((45, 0.0), (47, math.pi / 2))
    boundary: str = "ring"

    def __post_init__(self) -> None:
        points = tuple((int(x), float(phi)) for x, phi in self.coupling_points)
        object.__setattr__(self, "coupling_points", points)
        object.__setattr__(self, "N", int(self.N))
        if self.J <= 0:
            raise ConfigurationError("hopping J must be positive")
        if self.N < 2:
            raise ConfigurationError("need at least two resonators")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES}")
        if abs(self.omega_a) >= 2 * self.J:
            raise ConfigurationError("atomic frequency must lie inside the band (|omega_a| < 2J)")
        if not points:
            raise ConfigurationError("at least one coupling point is required")
        xs = [x for x, _ in points]
        for x in xs:
            if not 0 <= x < self.N:
                raise ConfigurationError(f"coupling point {x} outside [0, {self.N})")
        steps = {b - a for a, b in zip(xs, xs[1:])}
        if any(s < 1 for s in steps):
            raise ConfigurationError("coupling points must be strictly increasing")
        if len(steps) > 1:
            raise ConfigurationError("coupling points must be equally spaced")
        if self.g / self.J > WEAK_COUPLING_THRESHOLD:
            warnings.warn(
                f"g/J = {self.g / self.J:.3g} is outside the weak-coupling regime",
                stacklevel=3,
            )

    @classmethod
    def giant_atom(
        cls,
        d: int = 2,
        phi_c: float | str = math.pi / 2,
        *,
        L: int = 2,
        phases: Sequence[float | str] | None = None,
        N: int = 90,
        g: float = 0.2,
        J: float = 1.0,
        omega_a: float = 0.0,
        x1: int | None = None,
        boundary: str = "ring",
    ) -> "SystemConfig":
        """Equally spaced atom with first leg at ``x1`` (default ``N // 2``).

        ``phases`` overrides ``phi_c``; for two legs ``phi_c`` is the second
        leg's phase with the first gauged to zero.
        """
        if phases is None:
            if L == 1:
                phases = (0.0,)
            elif L == 2:
                phases = (0.0, parse_phase(phi_c))
            else:
                raise ConfigurationError("give explicit phases for L > 2")
        phases = tuple(parse_phase(p) for p in phases)
        x1 = N // 2 if x1 is None else x1
        points = tuple((x1 + j * d, phases[j]) for j in range(len(phases)))
        return cls(J=J, g=g, omega_a=omega_a, N=N, coupling_points=points, boundary=boundary)

    # geometry -------------------------------------------------------------
    @property
    def L(self) -> int:
        return len(self.coupling_points)

    @property
    def positions(self) -> tuple[int, ...]:
        return tuple(x for x, _ in self.coupling_points)

    @property
    def phases(self) -> tuple[float, ...]:
        return tuple(phi for _, phi in self.coupling_points)

    @property
    def d(self) -> int:
        """Leg spacing (0 for a small atom)."""
        xs = self.positions
        return xs[1] - xs[0] if len(xs) > 1 else 0

    @property
    def span(self) -> int:
        return self.positions[-1] - self.positions[0]

    # derived constants ----------------------------------------------------
    def derived(self) -> DerivedConstants:
        k_a = math.acos(-self.omega_a / (2 * self.J))
        v = 2 * self.J * math.sin(k_a)
        gamma = 4 * self.g**2 / v
        phases = self.phases
        phi_c = phases[1] - phases[0] if len(phases) > 1 else 0.0
        return DerivedConstants(
            k_a=k_a, v=v, Gamma=gamma, t_d=self.d / v, phi_WG=k_a * self.d, phi_c=phi_c
        )

    def t_max_valid(self) -> float:
        """Time before re-emitted light can come back to the atom."""
        v = self.derived().v
        if self.boundary == "ring":
            return 0.9 * (self.N - self.span) / v
        gap = min(self.positions[0], self.N - 1 - self.positions[-1])
        return 0.9 * 2 * gap / v

    def with_phases(self, phases: Iterable[float]) -> "SystemConfig":
        points = tuple((x, float(p)) for x, p in zip(self.positions, phases, strict=True))
        return replace(self, coupling_points=points)

    # serialisation --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "J": self.J,
            "g": self.g,
            "omega_a": self.omega_a,
            "N": self.N,
            "boundary": self.boundary,
            "coupling_points": [{"x": x, "phi": phi} for x, phi in self.coupling_points],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {"J", "g", "omega_a", "N", "boundary", "coupling_points"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: data[k] for k in ("J", "g", "omega_a", "N", "boundary") if k in data}
        for key in ("J", "g", "omega_a"):
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
        if "coupling_points" in data:
            points = []
            for item in data["coupling_points"]:
                if isinstance(item, dict):
                    points.append((int(item["x"]), parse_phase(item.get("phi", 0.0))))
                else:
                    x, phi = item
                    points.append((int(x), parse_phase(phi)))
            kwargs["coupling_points"] = tuple(points)
        return cls(**kwargs)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path: str | Path) -> SystemConfig:
    """Read a flat key-value config file (JSON or YAML)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        import yaml

        data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a mapping at top level")
    return SystemConfig.from_dict(data)


@dataclass
class AmplitudeState:
    """One-excitation wavefunction: atomic amplitude plus site amplitudes."""

    eps: complex
    field: np.ndarray = field(repr=False)

    @classmethod
    def excited(cls, N: int) -> "AmplitudeState":
        return cls(1.0 + 0j, np.zeros(N, dtype=complex))

    @classmethod
    def from_vector(cls, psi: np.ndarray) -> "AmplitudeState":
        return cls(complex(psi[0]), np.array(psi[1:], dtype=complex))

    def vector(self) -> np.ndarray:
        return np.concatenate(([self.eps], self.field)).astype(complex)

    def norm(self) -> float:
        return abs(self.eps) ** 2 + float(np.vdot(self.field, self.field).real)

    def momentum_amplitudes(self) -> np.ndarray:
        """``c_k = sum_x e^{ikx} c_x / sqrt(N)`` on the grid ``k = 2 pi n / N``."""
        N = self.field.size
        return np.fft.ifft(self.field) * np.sqrt(N)


def build_hamiltonian(cfg: SystemConfig, sparse: bool = False):
    """Single-excitation Hamiltonian, dimension ``N + 1`` (atom first)."""
    N = cfg.N
    rows, cols, vals = [], [], []
    hop_pairs = [(x, x + 1) for x in range(N - 1)]
    if cfg.boundary == "ring" and N > 2:
        hop_pairs.append((N - 1, 0))
    for a, b in hop_pairs:
        rows += [1 + a, 1 + b]
        cols += [1 + b, 1 + a]
        vals += [-cfg.J, -cfg.J]
    for x, phi in cfg.coupling_points:
        coupling = cfg.g * np.exp(1j * phi)
        rows += [1 + x, 0]
        cols += [0, 1 + x]
        vals += [coupling, np.conj(coupling)]
    rows.append(0)
    cols.append(0)
    vals.append(cfg.omega_a)
    H = sp.coo_matrix((np.asarray(vals, dtype=complex), (rows, cols)), shape=(N + 1, N + 1))
    H = H.tocsr()
    H.sum_duplicates()
    return H if sparse else H.toarray()


def brillouin_grid(N: int) -> np.ndarray:
    """Allowed momenta ``2 pi n / N`` folded into ``(-pi, pi]``."""
    k = 2 * np.pi * np.arange(N) / N
    return np.where(k > np.pi, k - 2 * np.pi, k)


def coupling_in_momentum_space(cfg: SystemConfig, k: float | np.ndarray) -> complex | np.ndarray:
    """``g_k = g / sqrt(N) * sum_j exp(i (phi_j + k x_j))``; ``k`` must be on the grid."""
    k_arr = np.asarray(k, dtype=float)
    n = k_arr * cfg.N / (2 * np.pi)
    if np.any(np.abs(n - np.round(n)) > 1e-9):
        raise ConfigurationError("momentum not on the N-point Brillouin grid")
    phases = np.asarray(cfg.phases)
    xs = np.asarray(cfg.positions)
    arg = phases[None, :] + k_arr.reshape(-1, 1) * xs[None, :]
    gk = cfg.g / np.sqrt(cfg.N) * np.exp(1j * arg).sum(axis=1)
    return complex(gk[0]) if k_arr.ndim == 0 else gk.reshape(k_arr.shape)


def nearest_grid_momentum(N: int, k: float) -> float:
    n = round(k * N / (2 * np.pi))
    return 2 * np.pi * n / N


def gauge_fix(cfg: SystemConfig) -> SystemConfig:
    """Shift every coupling phase by ``-phi_1`` so that the first leg is real."""
    phi1 = cfg.phases[0]
    return cfg.with_phases(p - phi1 for p in cfg.phases)
