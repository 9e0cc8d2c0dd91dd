"""Command-line front end.

    acdln converge --axis time|space [--config FILE]
    acdln run --scenario NAME [--config FILE]
    acdln adapt --scenario NAME [--config FILE]

Results go to ``$ACDLN_OUTPUT`` (default ``./acdln-output``), in a
sub-directory named after the command and scenario unless ``[output] dir``
or ``--output`` says otherwise.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from . import io
from .adapt import run_adaptive, run_constant
from .config import ConfigError, RunConfig, parse_config
from .energy import EnergyRecord
from .solver import ConfigurationError, Discretization, FieldState, StepFailure
from .verify.convergence import run_convergence
from .verify.scenarios import scenario_library

log = logging.getLogger("acdln")

OUTPUT_ENV = "ACDLN_OUTPUT"

# exit codes by diagnostic category
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STEP_FAILURE = 3
EXIT_SINGULAR = 4
EXIT_OUTPUT = 5
EXIT_NUMERICAL = 6


def emit_snapshot(disc: Discretization, state: FieldState, path: str | Path) -> Path:
    return io.write_vtk(path, disc, state.curr, state.t_curr)


def emit_energy_trace(records: list[EnergyRecord], path: str | Path) -> Path:
    return io.write_energy_csv(path, records)


def output_dir(cfg: RunConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ENV, "acdln-output"))
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out = out if out.is_absolute() else root / out
    else:
        tag = cfg.axis if cfg.command == "converge" else cfg.scenario
        out = root / f"{cfg.command}-{tag}"
    out.mkdir(parents=True, exist_ok=True)
    return out


class SnapshotWriter:
    """Callback for the stepping driver that writes VTK files at chosen times or strides."""

    def __init__(self, disc: Discretization, out: Path, times=(), stride: int = 0, T: float = 1.0):
        self.disc = disc
        self.out = out
        self.pending = sorted(times)
        self.stride = stride
        self.eps = 1e-9 * max(1.0, abs(T))
        self.written: list[Path] = []

    def __call__(self, step: int, state: FieldState, rec: EnergyRecord) -> None:
        due = False
        if self.stride:
            due = step % self.stride == 0
        while self.pending and state.t_curr >= self.pending[0] - self.eps:
            self.pending.pop(0)
            due = True
        if due:
            path = self.out / f"snapshot_{step:06d}.vtk"
            self.written.append(emit_snapshot(self.disc, state, path))


def _simulate(cfg: RunConfig, out: Path) -> dict:
    sc = scenario_library(cfg.scenario, params=cfg.params, h=cfg.h, k=cfg.k, T=cfg.T,
                          seed=cfg.seed, theta=cfg.theta)
    t0 = time.perf_counter()
    disc, problem, state = sc.setup()
    log.info("%s: %d unknowns, setup %.1f s", sc.name, disc.size, time.perf_counter() - t0)
    snaps = None
    if cfg.snapshots:
        snaps = SnapshotWriter(disc, out, () if cfg.snapshot_stride else sc.snapshot_times,
                               cfg.snapshot_stride, sc.T)
    if cfg.command == "run":
        result = run_constant(problem, state, sc.k, sc.T, sc.theta, cfg.solver, callback=snaps)
    else:
        result = run_adaptive(problem, state, cfg.controller, sc.T, sc.theta, cfg.solver, callback=snaps)
    emit_energy_trace(result.records, out / "energy.csv")
    max_bu = max((d[1] for d in result.divergence), default=0.0)
    max_bw = max((d[2] for d in result.divergence), default=0.0)
    summary = {
        "steps": result.steps,
        "final_time": result.state.t_curr,
        "energy_violations": len(result.energy_violations),
        "max_div_u": max_bu,
        "max_div_w": max_bw,
        "factorizations": result.factorizations,
        "snapshots": [p.name for p in snaps.written] if snaps else [],
        "unknowns": disc.size,
    }
    print(f"{sc.name}: {result.steps} steps to t={result.state.t_curr:g}, "
          f"E {result.records[0].E:.6e} -> {result.records[-1].E:.6e}, "
          f"{len(result.energy_violations)} energy violations")
    return summary


def _converge(cfg: RunConfig, out: Path) -> dict:
    table = run_convergence(cfg.axis, cfg.levels, cfg.fixed, cfg.T, cfg.theta, cfg.params, cfg.solver)
    table.write_csv(out / f"convergence_{cfg.axis}.csv")
    text = table.text()
    (out / f"convergence_{cfg.axis}.txt").write_text(text + "\n")
    print(text)
    return {"rates": table.rates()}


def execute(cfg: RunConfig) -> Path:
    """Run a validated configuration and write its outputs; returns the output directory."""
    out = output_dir(cfg)
    t0 = time.perf_counter()
    summary = _converge(cfg, out) if cfg.command == "converge" else _simulate(cfg, out)
    summary["wall_time_s"] = round(time.perf_counter() - t0, 3)
    io.write_metadata(out / "metadata.json", cfg.as_dict(), cfg.seed, {"summary": summary})
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acdln", description="Allen-Cahn active fluid solver")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    conv = sub.add_parser("converge", help="manufactured-solution convergence study")
    conv.add_argument("--axis", choices=("time", "space"))
    for name in ("run", "adapt"):
        p = sub.add_parser(name, help=f"{'constant-step' if name == 'run' else 'adaptive'} scenario run")
        p.add_argument("--scenario")
    for p in sub.choices.values():
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--output", help="output directory (relative paths live under $%s)" % OUTPUT_ENV)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, command=args.command, scenario=getattr(args, "scenario", None),
                           axis=getattr(args, "axis", None), output_dir=args.output)
    except ConfigError as exc:
        print(f"acdln: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = execute(cfg)
    except StepFailure as exc:
        print(f"acdln: step failure: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_STEP_FAILURE
    except ConfigurationError as exc:
        print(f"acdln: singular system: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except OSError as exc:
        print(f"acdln: output error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except (FloatingPointError, RuntimeError) as exc:
        print(f"acdln: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"outputs in {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
