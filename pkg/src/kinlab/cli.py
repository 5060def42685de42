"""Command line entry point: ``python -m kinlab <command> [options]``.

Exit codes: 0 success, 1 invalid input or a failed check, 2 a numerical
contract breach (boundary-mass monitor, aliasing guard, solver bias).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .harness import (ExperimentConfig, SolverBiasError, replica_seed, run_lln, run_mild_residual, run_verify,
                      run_zdecay, write_json)
from .mildsolver import BoundaryMassError, DensityField, solve
from .particles import (atomic_write_text, kernel_from_spec, load_points, simulate, write_increments,
                        write_paths_csv)
from .semigroup import AliasingError
from .spectral_core import delta_norm, dual_norm, measure_char

log = logging.getLogger("kinlab")

COMMANDS = ("simulate", "solve", "norm", "lln", "zdecay", "mild-residual", "verify")
_EXPERIMENT_OF = {"lln": "lln", "zdecay": "zdecay", "mild-residual": "mild-residual",
                  "simulate": "lln", "solve": "solver-verify", "norm": "lln", "verify": "semigroup-verify"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kinlab", description="Kinetic mean-field particle and PDE laboratory.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML experiment configuration")
    p.add_argument("--seed", type=int, help="master seed (nonnegative integer)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker processes for replicas")
    p.add_argument("--N", type=int, help="particle count for simulate/norm")
    p.add_argument("--points", help="CSV or .npy file of (x, v) rows for norm")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _config(args) -> ExperimentConfig:
    over = {"seed": args.seed, "out": args.out, "threads": args.threads}
    if args.config:
        if not os.path.isfile(args.config):
            raise FileNotFoundError(f"configuration file not found: {args.config}")
        cfg = ExperimentConfig.from_toml(args.config, **over)
    else:
        cfg = ExperimentConfig.defaults(_EXPERIMENT_OF[args.command], **over)
    return cfg


def _cmd_simulate(cfg: ExperimentConfig, args) -> int:
    N = args.N or cfg.N_ladder[0]
    tmpl = cfg.sim_template()
    sim = replace(tmpl, N=N, seed=replica_seed(cfg.seed, N, 0),
                  snapshot_steps=tuple(cfg.snapshot_steps(tmpl.steps)), store="snapshots")
    path = simulate(sim)
    os.makedirs(cfg.out, exist_ok=True)
    write_paths_csv(os.path.join(cfg.out, "paths.csv"), path)
    write_increments(os.path.join(cfg.out, "increments.bin"), path.dB, path.dI)
    write_json(os.path.join(cfg.out, "simulate.json"),
               {"experiment": "simulate", "config_hash": cfg.hash(), "N": N, "steps": path.steps,
                "snapshots": len(path.stored)})
    return 0


def _cmd_solve(cfg: ExperimentConfig, args) -> int:
    scfg = cfg.solver_config()
    nu0 = DensityField.from_mixture(cfg.mixture_obj(), scfg.grid)
    tmpl = cfg.sim_template()
    times = cfg.snapshot_steps(tmpl.steps) * tmpl.dt
    run = solve(nu0, cfg.T, kernel_from_spec(cfg.kernel), scfg, times)
    os.makedirs(cfg.out, exist_ok=True)
    lines = ["t,mass,mean_x,mean_v,var_x,var_v,boundary_mass"]
    for nu in run.densities:
        m, C = nu.moments()
        row = (nu.t, nu.mass(), m[0], m[1], C[0, 0], C[1, 1], nu.boundary_mass())
        lines.append(",".join(repr(float(a)) for a in row))
    atomic_write_text(os.path.join(cfg.out, "moments.csv"), "\n".join(lines) + "\n")
    write_json(os.path.join(cfg.out, "solve.json"),
               {"experiment": "solve", "config_hash": cfg.hash(), "solver": scfg.describe(),
                "diagnostics": {k: v for k, v in run.diagnostics.items() if isinstance(v, (int, float, str))}})
    return 0


def _cmd_norm(cfg: ExperimentConfig, args) -> int:
    grid = cfg.freq_grid()
    if args.points:
        pts = load_points(args.points)
    else:
        N = args.N or cfg.N_ladder[0]
        pts = cfg.sampler().draw(N, np.random.default_rng(replica_seed(cfg.seed, N, 0)))
    n = pts.shape[0]
    val = dual_norm(measure_char(pts, np.full(n, 1.0 / n), grid), cfg.order)
    out = {"N": int(n), "s": cfg.order.s, "dual_norm": val, "delta_norm": delta_norm(grid, cfg.order)}
    print(json.dumps(out, sort_keys=True))
    if args.out:
        os.makedirs(cfg.out, exist_ok=True)
        write_json(os.path.join(cfg.out, "norm.json"), out)
    return 0


def _cmd_report(report, cfg: ExperimentConfig) -> int:
    paths = report.write(cfg.out)
    s = report.summary()
    print(f"{s['experiment']}: slope {s['slope']:.4f}  ci [{s['ci'][0]:.4f}, {s['ci'][1]:.4f}]  -> {paths['summary.json']}")
    return 0


def _cmd_mild(cfg: ExperimentConfig, args) -> int:
    study = run_mild_residual(N=args.N or 8, seed=cfg.seed, T=cfg.T, kernel=cfg.kernel)
    os.makedirs(cfg.out, exist_ok=True)
    write_json(os.path.join(cfg.out, "mild_residual.json"), {"config_hash": cfg.hash(), **study.summary()})
    for dt, r in zip(study.dts, study.residuals):
        print(f"dt={dt:.0e}  residual={r:.3e}")
    print(f"monotone={study.monotone} ratio={study.ratio:.3f}")
    return 0


def _cmd_verify(cfg: ExperimentConfig, args) -> int:
    checks = run_verify(cfg.seed)
    failed = 0
    for c in checks:
        tag = "PASS" if c.ok else ("FAIL" if c.contract else "NOTE")
        print(f"[{tag}] {c.name}: {c.detail}")
        failed += (not c.ok) and c.contract
    return 1 if failed else 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "simulate":
            return _cmd_simulate(cfg, args)
        if args.command == "solve":
            return _cmd_solve(cfg, args)
        if args.command == "norm":
            return _cmd_norm(cfg, args)
        if args.command == "lln":
            return _cmd_report(run_lln(cfg), cfg)
        if args.command == "zdecay":
            return _cmd_report(run_zdecay(cfg), cfg)
        if args.command == "mild-residual":
            return _cmd_mild(cfg, args)
        return _cmd_verify(cfg, args)
    except (BoundaryMassError, AliasingError, SolverBiasError, FloatingPointError) as exc:
        log.error("numerical contract breach: %s", exc)
        return 2
    except (ValueError, FileNotFoundError, KeyError, TypeError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
