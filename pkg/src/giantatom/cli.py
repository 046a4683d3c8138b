"""Command-line front end.

Subcommands: ``decay``, ``markov-solve``, ``bic``, ``collision``,
``chirality``, ``crossvalidate``.  Every run writes a ``manifest.json`` into
the output directory and stamps its hash on every artifact.  The exit code
is 0 only if every requested run finished without an invariant violation.
The environment variable ``GIANTATOM_WORKERS`` sets the worker-pool size for
sweeps (default 1).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bic_analysis import bic_exists, build_bic, verify_bic_numerically
from .collision_sim import emission_fractions, run_collisions
from .core_model import SystemConfig, format_phase, load_config, parse_phase
from .dde_engine import DdeSpec, asymptotic_amplitude, integrate
from .errors import ConfigurationError, NoBoundStateError, RootFindingError
from .lattice_sim import evolve
from .markov_analysis import lindblad_rate, solve_markov_phases
from .trajectory import Trajectory, atomic_write, max_pop_deviation

log = logging.getLogger("giantatom")

SOLVERS = ("lattice", "dde", "collision")
WORKERS_ENV = "GIANTATOM_WORKERS"
NORM_TOL = 1e-9
CROSS_TOL = 2e-2
DEFAULT_PHI_C = ("0", "pi/2", "pi")
DEFAULT_D = (1, 2, 3, 4, 5, 6)


@dataclass
class RunManifest:
    command: str
    config: dict
    solvers: list[str]
    sweep: dict
    out_dir: str
    settings: dict = field(default_factory=dict)
    deterministic: bool = True
    tool_version: str = __version__

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def digest(self) -> str:
        payload = asdict(self)
        payload.pop("out_dir")
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def write(self, out: Path) -> str:
        h = self.digest()
        body = {**asdict(self), "config_hash": self.config_hash, "manifest_hash": h}
        atomic_write(out / "manifest.json", json.dumps(body, indent=1, sort_keys=True) + "\n")
        return h


# --- helpers --------------------------------------------------------------


def _split_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _phase_label(phi: float) -> str:
    return format_phase(phi).replace("*", "").replace("/", "over").replace("-", "m")


def _base_config(args) -> SystemConfig:
    return load_config(args.config) if args.config else SystemConfig()


def _cell_config(base: SystemConfig, d: int, phi_c: float, N: int | None = None) -> SystemConfig:
    return SystemConfig.giant_atom(
        d=d, phi_c=phi_c, N=N or base.N, g=base.g, J=base.J,
        omega_a=base.omega_a, boundary=base.boundary,
    )


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _write_traj(traj: Trajectory, out: Path, stem: str, fmt: str, manifest_hash: str,
                reference_rate: float | None = None, include_bins: bool = False) -> Path:
    if fmt == "csv":
        path = out / f"{stem}.csv"
        traj.to_csv(path, reference_rate=reference_rate, header_comment=f"manifest={manifest_hash}")
    else:
        path = out / f"{stem}.json"
        traj.to_json(path, include_bins=include_bins, extra={"manifest_hash": manifest_hash})
    return path


def _write_json(path: Path, data: dict, manifest_hash: str) -> None:
    atomic_write(path, json.dumps({**data, "manifest_hash": manifest_hash}, indent=1,
                                  sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(type(obj).__name__)


def _finite(x: float):
    return None if x is None or not math.isfinite(x) else x


def _run_solver(cfg: SystemConfig, solver: str, t_max: float, dt: float) -> Trajectory:
    if solver == "lattice":
        return evolve(cfg, t_max, dt)
    if solver == "dde":
        spec = DdeSpec.from_config(cfg)
        if cfg.L == 1:
            return integrate(spec, t_max, dt=dt)
        return integrate(spec, t_max, max(50, int(round(spec.t_d / dt))))
    if solver == "collision":
        return run_collisions(cfg, t_max, dt)
    raise ConfigurationError(f"unknown solver {solver!r}")


def _violations(traj: Trajectory) -> list[str]:
    out = []
    drift = traj.meta.get("max_norm_drift")
    if drift is not None and drift > NORM_TOL:
        out.append(f"{traj.solver_tag}: norm drift {drift:.3g} > {NORM_TOL:g}")
    if np.max(np.abs(traj.eps)) > 1 + 1e-9:
        out.append(f"{traj.solver_tag}: |eps| exceeds 1")
    return out


# --- decay ----------------------------------------------------------------


def _decay_cell(job):
    cfg_dict, d, phi_c, solvers, t_max, dt, fmt, out, manifest_hash = job
    cfg = _cell_config(SystemConfig.from_dict(cfg_dict), d, phi_c)
    Gamma = cfg.derived().Gamma
    rows, violations, trajs = [], [], {}
    for solver in solvers:
        traj = _run_solver(cfg, solver, t_max, dt)
        traj.config = cfg
        trajs[solver] = traj
        stem = f"decay_d{d}_phic{_phase_label(phi_c)}_{solver}"
        _write_traj(traj, Path(out), stem, fmt, manifest_hash, reference_rate=Gamma)
        mask = traj.valid_mask(t_max)
        dev = float(np.max(np.abs(traj.pop[mask] - np.exp(-Gamma * traj.times[mask]))))
        rows.append({"d": d, "phi_c": format_phase(phi_c), "solver": solver,
                     "max_dev_from_exp": dev, "t_max_valid": _finite(traj.t_max_valid),
                     "file": f"{stem}.{fmt}"})
        violations += _violations(traj)
    return rows, violations


def cmd_decay(args) -> int:
    base = _base_config(args)
    solvers = _split_list(args.solver or "lattice,dde")
    for s in solvers:
        if s not in SOLVERS:
            raise ConfigurationError(f"unknown solver {s!r}")
    ds = [int(x) for x in _split_list(args.d)] if args.d else list(DEFAULT_D)
    phis = [parse_phase(p) for p in (_split_list(args.phi_c) if args.phi_c else DEFAULT_PHI_C)]
    if not ds or not phis or any(d < 1 for d in ds):
        raise ConfigurationError("invalid sweep: need d >= 1 and at least one phase")
    t_max = args.t_max if args.t_max is not None else 20.0
    dt = args.dt if args.dt is not None else 0.01
    out = Path(args.out)
    manifest = RunManifest("decay", base.to_dict(), solvers,
                           {"d": ds, "phi_c": [format_phase(p) for p in phis]}, str(out),
                           {"t_max": t_max, "dt": dt, "format": args.format})
    h = manifest.write(out)
    jobs = [(base.to_dict(), d, p, solvers, t_max, dt, args.format, str(out), h)
            for d in ds for p in phis]
    workers = _workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_decay_cell, jobs))
    else:
        results = [_decay_cell(job) for job in jobs]
    rows = [r for rs, _ in results for r in rs]
    violations = [v for _, vs in results for v in vs]
    lines = [f"# manifest={h}", "d,phi_c,solver,max_dev_from_exp,t_max_valid"]
    for r in rows:
        lines.append(f"{r['d']},{r['phi_c']},{r['solver']},{r['max_dev_from_exp']!r},{r['t_max_valid']}")
    atomic_write(out / "decay_summary.csv", "\n".join(lines) + "\n")
    if args.plot_script:
        atomic_write(out / "decay.gp", _gnuplot_decay(rows, ds, phis, solvers, args.format, h))
    for r in rows:
        print(f"d={r['d']} phi_c={r['phi_c']:>6} {r['solver']:>9}: "
              f"max | |eps|^2 - exp(-Gamma t) | = {r['max_dev_from_exp']:.3e}")
    return _report(violations)


def _gnuplot_decay(rows, ds, phis, solvers, fmt, manifest_hash) -> str:
    cols = math.ceil(len(ds) / 2) if len(ds) > 1 else 1
    nrows = math.ceil(len(ds) / cols)
    out = [f"# manifest={manifest_hash}", "set datafile separator ','",
           "set terminal pngcairo size 1500,900", "set output 'decay.png'",
           f"set multiplot layout {nrows},{cols}", "set xlabel 'Jt'", "set ylabel '|eps|^2'"]
    if fmt != "csv":
        out.insert(0, "# plot script reads CSV output; rerun with --format csv")
    for d in ds:
        out.append(f"set title 'd = {d}'")
        curves = []
        for r in rows:
            if r["d"] == d:
                curves.append(f"'{r['file']}' using 1:4 with lines title '{r['phi_c']} {r['solver']}'")
        out.append("plot " + ", \\\n     ".join(curves))
    out.append("unset multiplot")
    return "\n".join(out) + "\n"


# --- markov-solve ---------------------------------------------------------


def cmd_markov_solve(args) -> int:
    L = args.L
    if not 2 <= L <= 8:
        raise ConfigurationError("L must lie in [2, 8]")
    pv = solve_markov_phases(L)
    phases = [format_phase(p) for p in pv.phases]
    if args.format == "json":
        print(json.dumps({"L": L, "phases": phases, "phases_rad": list(pv.phases),
                          "residuals": [float(r) for r in pv.residuals],
                          "is_markovian": pv.is_markovian}, indent=1))
    else:
        print(f"L = {L}")
        for j, p in enumerate(phases, start=1):
            print(f"phi_{j} = {p}")
        print("residuals: " + ", ".join(f"{r:.2e}" for r in pv.residuals))
    return 0 if pv.is_markovian else 1


# --- bic ------------------------------------------------------------------


def _single(args, name: str, default):
    raw = getattr(args, name)
    items = _split_list(raw) if raw else [default]
    if len(items) != 1:
        raise ConfigurationError(f"--{name.replace('_', '-')} takes a single value here")
    return items[0]


def cmd_bic(args) -> int:
    base = _base_config(args)
    d = int(_single(args, "d", "2"))
    phi_c = parse_phase(_single(args, "phi_c", "0"))
    cfg = _cell_config(base, d, phi_c)
    out = Path(args.out)
    h = RunManifest("bic", cfg.to_dict(), [], {"d": [d], "phi_c": [format_phase(phi_c)]},
                    str(out)).write(out)
    dc = cfg.derived()
    exists, m = bic_exists(d, dc.k_a, phi_c)
    report = {"exists": exists, "m": m, "d": d, "phi_c": format_phase(phi_c),
              "config_hash": cfg.config_hash()}
    violations = []
    if exists:
        state = build_bic(cfg)
        check = verify_bic_numerically(cfg)
        report.update(eps_pop=state.eps_pop, energy=state.energy, verification=check.to_dict())
        if not check.success:
            violations.append(f"numerical verification failed: {check.message}")
        lines = [f"# manifest={h}", "x,re,im,abs2"]
        for x, c in enumerate(state.profile):
            lines.append(f"{x},{c.real!r},{c.imag!r},{abs(c) ** 2!r}")
        atomic_write(out / "bic_profile.csv", "\n".join(lines) + "\n")
        print(f"trapped state: m = {m}, |eps|^2 = {state.eps_pop:.6f}, "
              f"overlap infidelity = {check.infidelity:.2e}")
    else:
        print("no bound state at these phases")
    _write_json(out / "bic_report.json", report, h)
    return _report(violations)


# --- collision ------------------------------------------------------------


def cmd_collision(args) -> int:
    base = _base_config(args)
    d = int(_single(args, "d", "2"))
    phi_c = parse_phase(_single(args, "phi_c", "pi/2"))
    t_max = args.t_max if args.t_max is not None else 20.0
    dt = args.dt if args.dt is not None else 0.01
    cfg = _cell_config(base, d, phi_c)
    out = Path(args.out)
    h = RunManifest("collision", cfg.to_dict(), ["collision", "dde"],
                    {"d": [d], "phi_c": [format_phase(phi_c)]}, str(out),
                    {"t_max": t_max, "dt": dt, "format": args.format}).write(out)
    traj = run_collisions(cfg, t_max, dt, keep_state=args.format == "json")
    ref = _run_solver(cfg, "dde", t_max, dt)
    _write_traj(traj, out, "collision", args.format, h,
                reference_rate=cfg.derived().Gamma, include_bins=True)
    dev = max_pop_deviation(traj, ref)
    _write_json(out / "collision_report.json",
                {"max_pop_deviation_vs_dde": dev, "dt": dt,
                 "max_norm_drift": traj.meta["max_norm_drift"]}, h)
    print(f"collision vs DDE: max population deviation {dev:.3e} (dt = {dt:g})")
    return _report(_violations(traj))


# --- chirality ------------------------------------------------------------


def chirality_run(base: SystemConfig, d: int, phi_c: float, dt: float = 0.01,
                  pop_target: float = 5e-4) -> Trajectory:
    """Lattice run long enough for the atom to decay below ``pop_target``.

    The chain is enlarged if needed so that no light wraps around the ring
    before the run ends.
    """
    probe = _cell_config(base, d, phi_c)
    dc = probe.derived()
    rate = lindblad_rate(dc.Gamma, phi_c, dc.k_a, d)
    if rate <= 1e-9 * dc.Gamma:
        raise ConfigurationError("the atom does not decay at these phases")
    t_end = math.ceil(math.log(1 / pop_target) / rate / 10) * 10 + 10
    span = d
    need = int(math.ceil(2 * dc.v * t_end / 0.9)) + span + 4
    N = max(base.N, need)
    cfg = _cell_config(base, d, phi_c, N=N)
    return evolve(cfg, float(t_end), dt, snapshot_every=None)


def cmd_chirality(args) -> int:
    base = _base_config(args)
    d = int(_single(args, "d", "1"))
    phi_c = parse_phase(_single(args, "phi_c", "pi/2"))
    dt = args.dt if args.dt is not None else 0.01
    out = Path(args.out)
    h = RunManifest("chirality", base.to_dict(), ["lattice"],
                    {"d": [d], "phi_c": [format_phase(phi_c)]}, str(out), {"dt": dt}).write(out)
    traj = chirality_run(base, d, phi_c, dt)
    fwd, bwd = _fractions_from_final(traj)
    pop = float(traj.pop[-1])
    report = {"d": d, "phi_c": format_phase(phi_c), "N": traj.config.N, "t_end": float(traj.times[-1]),
              "forward": fwd, "backward": bwd, "final_pop": pop,
              "closure": abs(fwd + bwd + pop - 1)}
    _write_json(out / "chirality_report.json", report, h)
    print(f"forward = {fwd:.6f}, backward = {bwd:.6f}, |eps|^2 = {pop:.2e}")
    violations = _violations(traj)
    if report["closure"] > 1e-6:
        violations.append(f"emission fractions do not close: {report['closure']:.3g}")
    return _report(violations)


def _fractions_from_final(traj: Trajectory) -> tuple[float, float]:
    if not traj.field_snapshots:
        raise ValueError("chirality run needs the final field")
    return emission_fractions(traj)


# --- crossvalidate --------------------------------------------------------


def cmd_crossvalidate(args) -> int:
    base = _base_config(args)
    d = int(_single(args, "d", "2"))
    phi_c = parse_phase(_single(args, "phi_c", "0"))
    t_max = args.t_max if args.t_max is not None else 20.0
    dt = args.dt if args.dt is not None else 0.01
    cfg = _cell_config(base, d, phi_c)
    out = Path(args.out)
    solvers = _split_list(args.solver) if args.solver else list(SOLVERS)
    h = RunManifest("crossvalidate", cfg.to_dict(), solvers,
                    {"d": [d], "phi_c": [format_phase(phi_c)]}, str(out),
                    {"t_max": t_max, "dt": dt, "format": args.format}).write(out)
    trajs = {}
    violations: list[str] = []
    for s in solvers:
        trajs[s] = _run_solver(cfg, s, t_max, dt)
        trajs[s].config = cfg
        _write_traj(trajs[s], out, f"crossvalidate_{s}", args.format, h)
        violations += _violations(trajs[s])
    pairs = {}
    for i, a in enumerate(solvers):
        for b in solvers[i + 1:]:
            dev = max_pop_deviation(trajs[a], trajs[b])
            pairs[f"{a}/{b}"] = dev
            print(f"{a:>9} vs {b:<9}: max population deviation {dev:.3e}")
    if "lattice" in trajs and "dde" in trajs and pairs["lattice/dde"] > CROSS_TOL:
        violations.append(f"lattice/dde deviation {pairs['lattice/dde']:.3g} > {CROSS_TOL:g}")
    report = {"pairwise_max_pop_deviation": pairs, "config_hash": cfg.config_hash(),
              "violations": violations}
    spec = DdeSpec.from_config(cfg)
    if cfg.L == 2:
        report["asymptotic_amplitude"] = asymptotic_amplitude(spec)
    _write_json(out / "crossvalidate_report.json", report, h)
    return _report(violations)


def _report(violations: Sequence[str]) -> int:
    for v in violations:
        log.error("invariant violation: %s", v)
    return 1 if violations else 0


# --- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="giantatom", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML system config")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--solver", help="comma-separated list from lattice,dde,collision")
    common.add_argument("--d", help="leg spacing(s), comma-separated")
    common.add_argument("--phi-c", dest="phi_c", help="phase difference(s), e.g. 0,pi/2,pi")
    common.add_argument("--t-max", dest="t_max", type=float, help="final time in units of 1/J")
    common.add_argument("--dt", type=float, help="time step in units of 1/J")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--plot-script", dest="plot_script", action="store_true",
                        help="also write a gnuplot script")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("decay", parents=[common], help="sweep d and phi_c, compare with exp(-Gamma t)")
    ms = sub.add_parser("markov-solve", parents=[common], help="solve the L-leg Markov phase conditions")
    ms.add_argument("--L", type=int, required=True)
    sub.add_parser("bic", parents=[common], help="trapped-state existence, profile and check")
    sub.add_parser("collision", parents=[common], help="collision-model run compared with the DDE")
    sub.add_parser("chirality", parents=[common], help="forward/backward emission fractions")
    sub.add_parser("crossvalidate", parents=[common], help="run all solvers on one config")
    return parser


COMMANDS = {
    "decay": cmd_decay,
    "markov-solve": cmd_markov_solve,
    "bic": cmd_bic,
    "collision": cmd_collision,
    "chirality": cmd_chirality,
    "crossvalidate": cmd_crossvalidate,
}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, NoBoundStateError, RootFindingError, ValueError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
