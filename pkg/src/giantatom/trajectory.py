"""Time series of the atomic amplitude produced by any of the solvers."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core_model import SystemConfig
from .errors import GridAlignmentError

SOLVER_TAGS = ("lattice", "dde", "collision")
CSV_COLUMNS = ("t", "re_eps", "im_eps", "pop")


@dataclass
class Trajectory:
    times: np.ndarray
    eps: np.ndarray
    solver_tag: str
    t_max_valid: float = math.inf
    field_snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list, repr=False)
    probes: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    config: SystemConfig | None = None
    warnings: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.eps = np.asarray(self.eps, dtype=complex)
        if self.solver_tag not in SOLVER_TAGS:
            raise ValueError(f"unknown solver tag {self.solver_tag!r}")
        if self.times.shape != self.eps.shape:
            raise ValueError("times and eps must have equal length")
        if self.times.size and (self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0)):
            raise ValueError("times must start at 0 and increase strictly")

    @property
    def pop(self) -> np.ndarray:
        return np.abs(self.eps) ** 2

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def valid_mask(self, t_max: float | None = None) -> np.ndarray:
        limit = self.t_max_valid if t_max is None else min(t_max, self.t_max_valid)
        return self.times <= limit + 1e-12

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Grid index of time ``t``; refuses off-grid requests."""
        i = int(np.searchsorted(self.times, t - tol))
        if i >= self.times.size or abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise GridAlignmentError(f"t = {t!r} is not on the trajectory grid")
        return i

    def eps_at(self, t: float) -> complex:
        return complex(self.eps[self.index_of(t)])

    def delayed(self, delay: float) -> np.ndarray:
        """``Theta(t - delay) eps(t - delay)`` on the same grid (grid-aligned only)."""
        shift = delay / self.dt
        n = int(round(shift))
        if abs(shift - n) > 1e-9 * max(1.0, shift):
            raise GridAlignmentError(f"delay {delay!r} is not a multiple of the step {self.dt!r}")
        out = np.zeros_like(self.eps)
        if n < self.eps.size:
            out[n:] = self.eps[: self.eps.size - n]
        return out

    def last_snapshot(self) -> tuple[float, np.ndarray]:
        if not self.field_snapshots:
            raise ValueError("trajectory carries no field snapshots")
        return self.field_snapshots[-1]

    # serialisation --------------------------------------------------------
    def metadata(self) -> dict:
        return {
            "solver_tag": self.solver_tag,
            "t_max_valid": None if math.isinf(self.t_max_valid) else self.t_max_valid,
            "config_hash": self.config.config_hash() if self.config else None,
            "config": self.config.to_dict() if self.config else None,
            "warnings": list(self.warnings),
            **{k: v for k, v in self.meta.items() if not k.startswith("_")},
        }

    def to_csv(self, path: str | Path | None = None, reference_rate: float | None = None,
               header_comment: str | None = None) -> str:
        """CSV with columns ``t, re_eps, im_eps, pop[, ref_exp, deviation]``.

        ``reference_rate`` is a population rate; ``ref_exp = exp(-rate t)``.
        """
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        writer = csv.writer(buf, lineterminator="\n")
        cols = list(CSV_COLUMNS)
        if reference_rate is not None:
            cols += ["ref_exp", "deviation"]
        writer.writerow(cols)
        pop = self.pop
        ref = None if reference_rate is None else np.exp(-reference_rate * self.times)
        for i, t in enumerate(self.times):
            row = [_fmt(t), _fmt(self.eps[i].real), _fmt(self.eps[i].imag), _fmt(pop[i])]
            if ref is not None:
                row += [_fmt(ref[i]), _fmt(abs(pop[i] - ref[i]))]
            writer.writerow(row)
        text = buf.getvalue()
        if path is not None:
            atomic_write(path, text)
        return text

    def to_json(self, path: str | Path | None = None, include_bins: bool = False,
                extra: dict | None = None) -> str:
        payload = {
            "metadata": {**self.metadata(), **(extra or {})},
            "t": self.times.tolist(),
            "re_eps": self.eps.real.tolist(),
            "im_eps": self.eps.imag.tolist(),
            "pop": self.pop.tolist(),
        }
        if include_bins and "bins" in self.meta.get("_payload", {}):
            payload["bins"] = self.meta["_payload"]["bins"]
        text = json.dumps(payload, indent=1, sort_keys=True)
        if path is not None:
            atomic_write(path, text)
        return text

    @classmethod
    def from_csv(cls, path: str | Path, solver_tag: str = "lattice") -> "Trajectory":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
        t = np.array([float(r["t"]) for r in rows])
        eps = np.array([complex(float(r["re_eps"]), float(r["im_eps"])) for r in rows])
        return cls(t, eps, solver_tag)

    @classmethod
    def from_json(cls, path: str | Path) -> "Trajectory":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        meta = payload["metadata"]
        cfg = SystemConfig.from_dict(meta["config"]) if meta.get("config") else None
        valid = meta.get("t_max_valid")
        return cls(
            payload["t"],
            np.asarray(payload["re_eps"]) + 1j * np.asarray(payload["im_eps"]),
            meta["solver_tag"],
            t_max_valid=math.inf if valid is None else valid,
            config=cfg,
            warnings=list(meta.get("warnings", [])),
        )


def _fmt(x: float) -> str:
    return repr(float(x))


def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def common_samples(a: Trajectory, b: Trajectory, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Times shared by two trajectories and the matching amplitudes."""
    idx = np.searchsorted(b.times, a.times - tol)
    idx = np.clip(idx, 0, b.times.size - 1)
    hit = np.abs(b.times[idx] - a.times) <= tol * np.maximum(1.0, np.abs(a.times))
    return a.times[hit], a.eps[hit], b.eps[idx[hit]]


def max_pop_deviation(a: Trajectory, b: Trajectory, t_max: float | None = None) -> float:
    t, ea, eb = common_samples(a, b)
    limit = min(a.t_max_valid, b.t_max_valid)
    if t_max is not None:
        limit = min(limit, t_max)
    keep = t <= limit + 1e-12
    return float(np.max(np.abs(np.abs(ea[keep]) ** 2 - np.abs(eb[keep]) ** 2)))
