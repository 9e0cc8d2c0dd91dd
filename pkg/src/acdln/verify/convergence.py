"""Manufactured-solution convergence studies in time and in space."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..mesh import build_rectangle_mesh
from ..solver import Discretization, FieldState, NewtonSolver, PhysParams, Problem, SolverConfig, \
    cn_bootstrap, dln_step, init_state
from .mms import Manufactured, _p, _phi, _u, _w
from .norms import error_norms, fit_rate

log = logging.getLogger(__name__)

FIELDS = ("u", "w", "xi", "p", "phi", "m")
DEFAULT_THETA = 0.3


@dataclass
class ConvergenceTable:
    axis: str  # "time" or "space"
    steps: list[float]  # k or h per level
    errors: dict[str, list[float]] = field(default_factory=dict)  # keys like "u_L2", "p_H1"

    def rate(self, key: str) -> float:
        return fit_rate(self.steps, self.errors[key])

    def rates(self) -> dict[str, float]:
        return {key: self.rate(key) for key in self.errors}

    def write_csv(self, path: str | Path) -> None:
        keys = list(self.errors)
        label = "k" if self.axis == "time" else "h"
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow([label] + keys)
            for i, s in enumerate(self.steps):
                out.writerow([repr(s)] + [repr(self.errors[k][i]) for k in keys])
            out.writerow(["rate"] + [repr(self.rate(k)) for k in keys])

    def text(self) -> str:
        """Fixed-width table: one row per level, one column per error, rates last."""
        label = "dt" if self.axis == "time" else "h"
        keys = list(self.errors)
        head = f"{label:>10}" + "".join(f"{k:>12}" for k in keys)
        lines = [head, "-" * len(head)]
        for i, s in enumerate(self.steps):
            lines.append(f"{_frac(s):>10}" + "".join(f"{self.errors[k][i]:>12.3e}" for k in keys))
        lines.append(f"{'rate':>10}" + "".join(f"{self.rate(k):>12.3f}" for k in keys))
        return "\n".join(lines)


def _frac(s: float) -> str:
    inv = 1.0 / s
    if abs(inv - round(inv)) < 1e-9:
        return f"1/{int(round(inv))}"
    return f"{s:.2e}"


def mms_errors(disc: Discretization, state: FieldState, exact: Manufactured, h1: bool = False) -> dict:
    """Errors of the current level against the exact solution at its time."""
    t = state.t_curr
    f = state.curr
    out = {}
    spec = {
        "u": (disc.vel, f.u, lambda x, y: _u(x, y, t)[0], lambda x, y: _u(x, y, t)[1], False),
        "w": (disc.vel, f.w, lambda x, y: _w(x, y, t)[0], lambda x, y: _w(x, y, t)[1], False),
        "xi": (disc.pres, f.xi, lambda x, y: exact.xi(x, y, t),
               lambda x, y: ((3 * x ** 2 - 3 * y ** 2) * math.exp(2 * t), -6 * x * y * math.exp(2 * t)), True),
        "p": (disc.pres, f.p, lambda x, y: _p(x, y, t)[0], lambda x, y: _p(x, y, t)[1], True),
        "phi": (disc.scal, f.phi, lambda x, y: _phi(x, y, t)[0], lambda x, y: _phi(x, y, t)[1], False),
        "m": (disc.scal, f.m, lambda x, y: exact.m(x, y, t), lambda x, y: exact.grad_m(x, y, t), False),
    }
    for name, (space, coef, val, grad, mean) in spec.items():
        out[f"{name}_L2"] = error_norms(space, coef, val, norm="L2", remove_mean=mean)
        if h1:
            out[f"{name}_H1"] = error_norms(space, coef, val, grad, norm="H1")
    return out


def run_mms(n: int, k: float, T: float = 1.0, theta: float = DEFAULT_THETA,
            params: PhysParams | None = None, cfg: SolverConfig | None = None) -> tuple:
    """March the manufactured problem on an n x n unit-square mesh with constant step k.

    Returns ``(disc, final_state, exact)``.
    """
    params = params or PhysParams()
    cfg = cfg or SolverConfig()
    exact = Manufactured(params)
    disc = Discretization(build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), n, n))
    problem = Problem(disc, params, boundary=exact.boundary(disc.vel), forcing=exact.forcing(disc.geo.xq))
    state = init_state(problem, exact, 0.0)
    nsteps = int(round(T / k))
    if abs(nsteps * k - T) > 1e-9 * T:
        raise ValueError(f"step {k} does not divide the horizon {T}")
    newton = NewtonSolver(cfg)
    state, _, _ = cn_bootstrap(problem, state, k, cfg, newton=newton)
    for i in range(1, nsteps):
        # land on integer multiples of k to avoid drift in the forcing times
        t_next = (i + 1) * k
        state, _, _ = dln_step(problem, state, t_next - state.t_curr, theta, cfg, newton=newton)
    return disc, state, exact


def run_convergence(axis: str, levels: Sequence[float], fixed: float, T: float = 1.0,
                    theta: float = DEFAULT_THETA, params: PhysParams | None = None,
                    cfg: SolverConfig | None = None) -> ConvergenceTable:
    """Time study (``levels`` are steps, ``fixed`` is h) or space study (the reverse)."""
    if axis not in ("time", "space"):
        raise ValueError(f"axis must be 'time' or 'space', got {axis!r}")
    if len(levels) < 2:
        raise ValueError("a convergence study needs at least two levels")
    cfg = cfg or SolverConfig(reuse_jacobian=True)
    table = ConvergenceTable(axis, [float(s) for s in levels])
    for s in levels:
        k, h = (s, fixed) if axis == "time" else (fixed, s)
        n = int(round(1.0 / h))
        disc, state, exact = run_mms(n, k, T, theta, params, cfg)
        errs = mms_errors(disc, state, exact, h1=(axis == "space"))
        log.info("%s level %s: %s", axis, s, errs)
        for key, val in errs.items():
            table.errors.setdefault(key, []).append(val)
    return table
