"""Command-line driver: single solves, convergence studies and property probes.

Examples::

    hho-mhd --mode converge --cube 2,3,4 --degree 0 --out runs/k0
    hho-mhd --mode solve --mesh cube.json --degree 1 --out runs/one
    hho-mhd --mode probe --cube 1,2 --out runs/probe

Every run uses the trigonometric manufactured solution on the unit cube.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .assembly import (Discretization, T_h, apriori_constant, energy_balance, infsup_probe)
from .errors import HHOError
from .mesh import build_cube_tet_mesh, compute_stats, load_mesh
from .mms import ErrorReport, compute_errors, convergence_rates, mms_params
from .newton import NewtonConfig, solve_discretization

RESULT_COLUMNS = ("h", "cells", "ifaces", "rho", "dofs_retained", "E_a_u", "E_a_b", "E_q",
                  "E_p", "E_0_u", "E_0_b", "newton_iters", "wall_s")
RATE_COLUMNS = ("h_coarse", "h_fine") + ErrorReport.NAMES
NUM_FMT = "%.11e"

# property thresholds used by the probe mode
SKEW_TOL = 1e-12
DIV_TOL = 1e-8
ENERGY_TOL = 1e-9
PROBE_SOLVE_TOL = 1e-10
INFSUP_MAX_CELLS = 400


@dataclass
class RunConfig:
    mode: str = "converge"
    mesh: str | None = None
    cube: list = field(default_factory=lambda: [1, 2])
    degree: int = 0
    nu_k: float = 0.1
    nu_m: float = 0.1
    rho: float = 1.0
    tol: float = 1e-6
    max_iters: int = 25
    out: str = "hho_out"
    workers: int = 1

    def __post_init__(self):
        if self.mode not in ("solve", "converge", "probe"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 <= self.degree <= 2:
            raise ValueError("degree must be 0, 1 or 2")
        if self.mesh is None:
            if not self.cube or any(n < 1 for n in self.cube):
                raise ValueError("cube sizes must be positive")
            if any(b <= a for a, b in zip(self.cube[:-1], self.cube[1:])):
                raise ValueError("cube sizes must be strictly increasing")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if not 0.0 < self.tol < 1.0 or self.max_iters < 1:
            raise ValueError("need 0 < tol < 1 and max_iters >= 1")
        if self.nu_k <= 0 or self.nu_m <= 0 or self.rho < 0:
            raise ValueError("viscosities must be positive and rho nonnegative")

    def meshes(self):
        if self.mesh is not None:
            yield Path(self.mesh).stem, load_mesh(self.mesh)
        else:
            for n in self.cube:
                yield f"cube{n}", build_cube_tet_mesh(n)


def _parse_cube(text: str) -> list:
    return [int(tok) for tok in str(text).replace(" ", "").split(",") if tok]


_CONVERTERS = {"mode": str, "mesh": str, "cube": _parse_cube, "degree": int, "nu_k": float,
               "nu_m": float, "rho": float, "tol": float, "max_iters": int, "out": str,
               "workers": int}


def read_config_file(path: str) -> dict:
    """key=value lines; '#' starts a comment; dashes in keys are accepted."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _CONVERTERS[key](value)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hho-mhd", description=__doc__.split("\n")[0])
    p.add_argument("--mode", choices=("solve", "converge", "probe"))
    src = p.add_mutually_exclusive_group()
    src.add_argument("--mesh", help="mesh JSON file")
    src.add_argument("--cube", type=_parse_cube, help="comma-separated tet cube sizes, e.g. 2,3,4")
    p.add_argument("--degree", type=int)
    p.add_argument("--nu-k", type=float)
    p.add_argument("--nu-m", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    return p


def config_from_args(argv=None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    merged = read_config_file(args.pop("config")) if args.get("config") else {}
    merged.update({k: v for k, v in args.items() if v is not None})
    if "mesh" in merged and args.get("cube") is None:
        merged.pop("cube", None)
    if args.get("cube") is not None:
        merged.pop("mesh", None)
    return RunConfig(**merged)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return NUM_FMT % value


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _solve_one(mesh, cfg: RunConfig, params, tol=None):
    start = time.perf_counter()
    disc = Discretization(mesh, cfg.degree, workers=cfg.workers)
    newton = NewtonConfig(tol=tol or cfg.tol, max_iter=cfg.max_iters)
    state, report, _ = solve_discretization(disc, params, newton)
    return disc, state, report, time.perf_counter() - start


def _result_row(mesh, disc, report, errors, wall):
    stats = compute_stats(mesh)
    row = {"h": stats.h, "cells": stats.n_cells, "ifaces": stats.n_interior_faces,
           "rho": stats.regularity, "dofs_retained": report.n_retained,
           "newton_iters": report.iterations, "wall_s": wall}
    row.update(errors.as_dict())
    return row


def _run_solves(cfg: RunConfig, out: Path, log) -> int:
    params = mms_params(cfg.nu_k, cfg.nu_m, cfg.rho)
    rows, reports = [], []
    meshes = list(cfg.meshes())
    if cfg.mode == "solve":
        meshes = meshes[:1]
    status = 0
    for name, mesh in meshes:
        try:
            disc, state, report, wall = _solve_one(mesh, cfg, params)
        except HHOError as exc:
            log(f"{name}: FAILED ({exc})")
            status = 1
            continue
        errors = compute_errors(state, disc, params)
        reports.append(errors)
        rows.append(_result_row(mesh, disc, report, errors, wall))
        log(f"{name}: cells={mesh.n_cells} h={mesh.h:.4f} iters={report.iterations} "
            f"rel.res={report.relative_residual:.3e} "
            + " ".join(f"{k}={v:.4e}" for k, v in errors.as_dict().items()))
    _write_csv(out / "results.csv", RESULT_COLUMNS, rows)
    if cfg.mode == "converge":
        _write_csv(out / "rates.csv", RATE_COLUMNS, convergence_rates(reports))
    return status


def _run_probe(cfg: RunConfig, out: Path, log) -> int:
    params = mms_params(cfg.nu_k, cfg.nu_m, cfg.rho)
    rng = np.random.default_rng(0)
    status = 0

    def check(label, value, ok):
        nonlocal status
        log(f"  {label}: {value:.6e} {'ok' if ok else 'VIOLATED'}")
        status |= 0 if ok else 1

    for name, mesh in cfg.meshes():
        log(f"{name}: cells={mesh.n_cells} k={cfg.degree}")
        try:
            disc, state, report, _ = _solve_one(mesh, cfg, params, tol=min(cfg.tol, PROBE_SOLVE_TOL))
        except HHOError as exc:
            log(f"  solve FAILED ({exc})")
            status = 1
            continue
        lay = disc.layout
        x = lay.vector_to_state(rng.standard_normal(lay.n_reduced), mesh)
        y = lay.vector_to_state(rng.standard_normal(lay.n_reduced), mesh)
        scale = abs(T_h(disc, x, y, x)) + abs(T_h(disc, x, x, y)) + 1e-300
        check("skew |T_h(x,y,y)| / scale", abs(T_h(disc, x, y, y)) / scale,
              abs(T_h(disc, x, y, y)) <= SKEW_TOL * scale)
        div = max(np.abs(disc.divergence(state.u)).max(), np.abs(disc.divergence(state.b)).max())
        check("max |D_T u_T|, |D_T b_T|", div, div <= DIV_TOL)
        lhs, rhs = energy_balance(disc, state, params)
        gap = abs(lhs - rhs) / abs(lhs)
        check("energy identity (relative gap)", gap, gap <= ENERGY_TOL)
        c_ap = apriori_constant(disc, state, params)
        check("a priori constant", c_ap, np.isfinite(c_ap) and c_ap > 0)
        if mesh.n_cells <= INFSUP_MAX_CELLS:
            beta = infsup_probe(disc)
            check("inf-sup estimate", beta, beta > 0)
        else:
            log("  inf-sup estimate: skipped (mesh too large for dense probe)")
    return status


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"config: {asdict(cfg)}"]

    def log(msg):
        print(msg, flush=True)
        lines.append(msg)

    if cfg.mode == "probe":
        status = _run_probe(cfg, out, log)
    else:
        status = _run_solves(cfg, out, log)
    lines.append(f"status: {'ok' if status == 0 else 'failed'}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    return status


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except (ValueError, OSError) as exc:
        print(f"hho-mhd: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
