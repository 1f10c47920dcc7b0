"""
Command-line interface.

    bipolarqt decompose --config job.ini --out results/
    bipolarqt trajectory --config job.ini --out results/
    bipolarqt verify --config job.ini --out results/
    bipolarqt scan --config job.ini --out results/

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure,
3 failed invariant under --strict (verify always reports failures with 3).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import checks as chk
from . import semiclassical as sc
from .bipolar import DecompositionError, TruncationError, decompose
from .config import ConfigError, JobConfig, build_potential, build_state, load_config
from .eigenstates import EigenstateError
from .numerics import BracketError, QuadratureError, StepSizeError
from .trajectories import TrajectoryExitError, ensemble_starts, propagate_bipolar
from .unipolar import unipolar_of

log = logging.getLogger("bipolarqt")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVARIANT = 0, 1, 2, 3

_NUMERIC_ERRORS = (QuadratureError, StepSizeError, BracketError, EigenstateError, TruncationError,
                   TrajectoryExitError, sc.TurningPointError, FloatingPointError)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: List[str], columns) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def write_json(path: Path, data) -> None:
    _atomic_write(path, json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Jobs
# ---------------------------------------------------------------------------


def _setup(cfg: JobConfig, flux=None, x0=None):
    pot = build_potential(cfg)
    state = build_state(cfg, pot)
    decomp = decompose(state, flux=cfg.flux if flux is None else flux, x0=cfg.x0 if x0 is None else x0,
                       method=cfg.method, branch_offset=cfg.branch_offset, trunc_tol=cfg.trunc_tol)
    return pot, state, decomp


def _curves(decomp, grid):
    st = decomp.state
    data = sc.semiclassical_data(st.potential, st.energy)
    cols = [grid, st.psi(grid), decomp.action(grid), decomp.amplitude(grid), decomp.momentum(grid),
            decomp.quantum_potential(grid), decomp.modified_potential(grid), data.p_sc(grid),
            unipolar_of(st).amplitude(grid)]
    return ["x", "psi", "s", "r", "p", "q", "u", "p_sc", "R_unipolar"], cols, data


def _meta(decomp, data, results, seed=None) -> dict:
    delta_s, j_quantum = decomp.total_action()
    meta = decomp.metadata()
    meta.update({
        "J_quantum": j_quantum,
        "J_semiclassical": data.action,
        "q_at_x0": float(decomp.quantum_potential(decomp.x0)),
        "checks": chk.meta_flags(results),
    })
    if seed is not None:
        meta["seed"] = seed
    return meta


def cmd_decompose(cfg: JobConfig, out: Path, grid_points: int, seed=None) -> list:
    _, _, decomp = _setup(cfg)
    grid = decomp.grid(grid_points)
    header, cols, data = _curves(decomp, grid)
    results = chk.run_checks(decomp, grid=grid, grid_points=grid_points)
    write_csv(out / "curves.csv", header, cols)
    uni = unipolar_of(decomp.state)
    lo, hi = sc.turning_points(decomp.state.potential, decomp.state.energy)
    pad = 0.5 * (hi - lo)
    ug = np.linspace(max(lo - pad, decomp.window[0]), min(hi + pad, decomp.window[1]), grid_points)
    write_csv(out / "unipolar.csv", ["x", "R", "Q", "U"],
              [ug, uni.amplitude(ug), uni.quantum_potential(ug), uni.modified_potential(ug)])
    meta = _meta(decomp, data, results, seed)
    meta["node_types"] = uni.node_types
    write_json(out / "meta.json", meta)
    log.info("J_quantum = %.12g, q(x0) = %.6g", meta["J_quantum"], meta["q_at_x0"])
    return results


def _trajectory_starts(cfg, decomp):
    if cfg.starts == "x0":
        return [decomp.x0]
    if isinstance(cfg.starts, tuple):
        return list(ensemble_starts(decomp, cfg.starts[1]))
    return list(cfg.starts)


def cmd_trajectory(cfg: JobConfig, out: Path, seed=None) -> list:
    _, _, decomp = _setup(cfg)
    starts = _trajectory_starts(cfg, decomp)
    summary = []
    results = []
    for i, x_start in enumerate(starts):
        name = "trajectory.csv" if len(starts) == 1 else f"trajectory_{i:03d}.csv"
        traj = propagate_bipolar(decomp, float(x_start), cfg.t_end, dt=cfg.dt, record_every=cfg.record_every)
        write_csv(out / name, ["t", "x", "p", "h", "lm_dev"], traj.rows().T)
        d = traj.diagnostics
        summary.append({"file": name, "x_start": float(x_start), **d})
        results.append(chk.CheckResult(f"lm_adherence[{i}]", d["max_lm_dev"] <= 1e-6, d["max_lm_dev"], 1e-6))
        results.append(chk.CheckResult(f"monotonic[{i}]", d["monotonic"], 0.0 if d["monotonic"] else 1.0, 0.0))
    meta = {"n": decomp.n, "E": decomp.state.energy, "F": decomp.flux, "x0": decomp.x0,
            "t_end": cfg.t_end, "dt": cfg.dt, "trajectories": summary,
            "checks": {c.name: c.passed for c in results}}
    if seed is not None:
        meta["seed"] = seed
    write_json(out / "trajectory_meta.json", meta)
    return results


def cmd_verify(cfg: JobConfig, out: Path, grid_points: int, seed=None) -> list:
    _, _, decomp = _setup(cfg)
    results = chk.run_checks(decomp, grid_points=grid_points)
    if cfg.has_trajectory:
        results += cmd_trajectory(cfg, out, seed)
    report = {"config": cfg.as_dict(), "decomposition": decomp.metadata(),
              "checks": [c.as_dict() for c in results], "all_passed": chk.all_passed(results)}
    if seed is not None:
        report["seed"] = seed
    write_json(out / "report.json", report)
    for c in results:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} (tol {c.tolerance:.1e})")
    return results


def cmd_scan(cfg: JobConfig, out: Path, grid_points: int, seed=None) -> list:
    if not cfg.has_scan:
        raise ConfigError(f"{cfg.source}: the scan command needs a [scan] section")
    pot = build_potential(cfg)
    state = build_state(cfg, pot)
    rows = []
    results = []
    for i, flux in enumerate(cfg.fluxes):
        for j, x0 in enumerate(cfg.x0s):
            decomp = decompose(state, flux=flux, x0=x0, method=cfg.method, branch_offset=cfg.branch_offset,
                               trunc_tol=cfg.trunc_tol)
            grid = decomp.grid(grid_points)
            header, cols, data = _curves(decomp, grid)
            name = f"curves_F{i:02d}_x{j:02d}.csv"
            write_csv(out / name, header, cols)
            res = chk.run_checks(decomp, grid=grid, grid_points=grid_points)
            results += [chk.CheckResult(f"{c.name}[{i},{j}]", c.passed, c.value, c.tolerance, c.detail) for c in res]
            by = {c.name: c for c in res}
            _, j_quantum = decomp.total_action()
            rows.append([flux, x0, decomp.anchor, j_quantum, float(decomp.quantum_potential(decomp.x0)),
                         by["reconstruct"].value, by["flux"].value, float(np.max(decomp.quantum_potential(grid))),
                         float(all(c.passed for c in res))])
    cols = list(zip(*rows))
    write_csv(out / "summary.csv", ["F", "x0", "anchor", "J_quantum", "q_at_x0", "reconstruct_dev",
                                    "flux_dev", "max_q", "all_checks"], cols)
    return results


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bipolarqt", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("decompose", "write curves.csv, unipolar.csv and meta.json"),
                       ("trajectory", "propagate bipolar trajectories on u(x)"),
                       ("verify", "run the invariant suite and write report.json"),
                       ("scan", "decompose for every (F, x0) pair of the [scan] section")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path, help="job configuration file")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
        p.add_argument("--strict", action="store_true", help="exit with code 3 if any invariant fails")
        p.add_argument("--grid-points", type=int, default=None, help="base grid size (overrides the config)")
        p.add_argument("--seed", type=int, default=None, help="reserved; recorded in the outputs only")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        grid_points = args.grid_points if args.grid_points is not None else cfg.grid_points
        if grid_points < 11:
            raise ConfigError("--grid-points must be at least 11")
        if args.command == "decompose":
            results = cmd_decompose(cfg, args.out, grid_points, args.seed)
        elif args.command == "trajectory":
            results = cmd_trajectory(cfg, args.out, args.seed)
        elif args.command == "verify":
            results = cmd_verify(cfg, args.out, grid_points, args.seed)
        else:
            results = cmd_scan(cfg, args.out, grid_points, args.seed)
    except (ConfigError, DecompositionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    failed = [c.name for c in results if not c.passed]
    if failed:
        print("failed invariants: " + ", ".join(failed), file=sys.stderr)
        if args.strict or args.command == "verify":
            return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
