"""Time-step selection and the stepping driver.

The driver bootstraps with one Crank-Nicolson step, then advances with the
DLN scheme.  Step sizes come from a *step source*: a constant step, an
explicit repeating sequence, or the minimum-dissipation controller, which
doubles the step while the numerical dissipation is small compared with the
physical one and halves it otherwise.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .energy import EnergyMonitor, EnergyRecord, discrete_energy, dissipation_indicators
from .solver import FieldState, NewtonSolver, Problem, SolverConfig, StepFailure, cn_bootstrap, dln_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControllerConfig:
    k_min: float = 1e-4
    k_max: float = 0.01
    delta: float = 0.1
    k_0: float | None = None  # defaults to k_min
    strict_retry: bool = False  # retry a failed Newton solve at half the step

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not 0 < self.k_min <= self.k_max:
            raise ValueError(f"need 0 < k_min <= k_max, got k_min={self.k_min}, k_max={self.k_max}")
        if not self.k_min <= self.initial_step <= self.k_max:
            raise ValueError(f"k_0={self.k_0} outside [k_min, k_max]")

    @property
    def initial_step(self) -> float:
        return self.k_min if self.k_0 is None else self.k_0


def next_step(chi_u: float, chi_phi: float, k_n: float, cfg: ControllerConfig) -> float:
    """Double the step (capped at k_max) if max |chi| <= delta, else halve it (floored at k_min)."""
    if max(abs(chi_u), abs(chi_phi)) <= cfg.delta:
        return min(2.0 * k_n, cfg.k_max)
    return max(0.5 * k_n, cfg.k_min)


# ---------------------------------------------------------------------------
# step sources


class ConstantSteps:
    def __init__(self, k: float):
        if not k > 0:
            raise ValueError(f"step must be positive, got {k}")
        self.k = k

    def first(self) -> float:
        return self.k

    def next(self, k_n: float, indicators: dict) -> float:
        return self.k


class StepSequence:
    """Cycles through a fixed list of steps (for non-uniform grids in tests)."""

    def __init__(self, steps: Sequence[float]):
        if not steps or min(steps) <= 0:
            raise ValueError("need a non-empty list of positive steps")
        self.steps = list(steps)
        self.i = 0

    def first(self) -> float:
        self.i = 0
        return self.steps[0]

    def next(self, k_n: float, indicators: dict) -> float:
        self.i += 1
        return self.steps[self.i % len(self.steps)]


class Controller:
    """Minimum-dissipation controller; the bootstrap step and the first DLN step both use k_0."""

    def __init__(self, cfg: ControllerConfig):
        self.cfg = cfg
        self._after_bootstrap = True

    def first(self) -> float:
        self._after_bootstrap = True
        return self.cfg.initial_step

    def next(self, k_n: float, indicators: dict) -> float:
        if self._after_bootstrap:
            self._after_bootstrap = False
            return k_n
        return next_step(indicators["chi_u"], indicators["chi_phi"], k_n, self.cfg)


# ---------------------------------------------------------------------------
# driver


@dataclass
class RunResult:
    state: FieldState
    records: list[EnergyRecord]
    divergence: list[tuple[int, float, float]] = field(default_factory=list)  # (step, |Bu|, |Bw|)
    energy_violations: list[tuple[int, float]] = field(default_factory=list)
    clamped_steps: list[int] = field(default_factory=list)
    factorizations: int = 0
    truncated: bool = False  # stopped by the step budget before reaching T

    @property
    def steps(self) -> int:
        """Accepted steps, the bootstrap included."""
        return len(self.records) - 1

    @property
    def step_sizes(self) -> list[float]:
        return [r.k for r in self.records[1:]]


def _record(problem, prev, curr, nxt, coeffs, theta, step, t, k, iters) -> EnergyRecord:
    disc, params = problem.disc, problem.params
    ind = dissipation_indicators(disc, prev, curr, nxt, coeffs, params)
    E = discrete_energy(disc, nxt, curr, theta, params)
    return EnergyRecord(step=step, t=t, k=k, E=E, newton_iters=iters, **ind)


def march(problem: Problem, state: FieldState, theta: float, T: float, source, cfg: SolverConfig,
          energy_tol: float | None = None, callback: Callable | None = None,
          strict_energy: bool = False, retry: ControllerConfig | None = None,
          max_steps: int | None = None) -> RunResult:
    """Advance ``state`` (a single level at ``t_curr``) to exactly ``T``.

    ``callback(step, state, record)`` runs after every accepted step and once
    for the initial level with ``step = 0``.  With ``retry`` a step whose
    Newton solve fails is repeated at half the size, down to ``retry.k_min``.
    A run that has used ``max_steps`` accepted steps stops early and is
    marked ``truncated``.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    t0 = state.t_curr
    if not T > t0:
        raise ValueError(f"horizon {T} must exceed the start time {t0}")
    params = problem.params
    tol = 10.0 * cfg.newton_tol if energy_tol is None else energy_tol
    monitor = EnergyMonitor(params, tol, strict=strict_energy)
    newton = NewtonSolver(cfg)
    disc = problem.disc
    result = RunResult(state, monitor.records)

    E0 = discrete_energy(disc, state.curr, state.curr, theta, params)
    rec0 = EnergyRecord(step=0, t=t0, k=0.0, E=E0)
    monitor.add(rec0)
    if callback:
        callback(0, state, rec0)

    def clamp(k, t):
        remaining = T - t
        if k >= remaining * (1.0 - 1e-9):
            return remaining, True
        return k, False

    def attempt(fn, k, t):
        while True:
            try:
                return fn(k), k
            except StepFailure as exc:
                if retry is None or not retry.strict_retry or k <= retry.k_min * (1 + 1e-12):
                    raise
                k_new = max(0.5 * k, retry.k_min)
                log.warning("step at t=%.6g failed (%s); retrying with k=%.3e", t, exc, k_new)
                k = k_new

    k, clamped = clamp(source.first(), t0)
    (new_state, coeffs, info), k = attempt(lambda kk: cn_bootstrap(problem, state, kk, cfg, newton=newton), k, t0)
    step = 1
    if clamped:
        new_state = FieldState(new_state.t_prev, T, new_state.prev, new_state.curr)
    rec = _record(problem, state.curr, state.curr, new_state.curr, coeffs, theta, step,
                  new_state.t_curr, k, info.iterations)
    state = new_state
    _accept(result, monitor, disc, state, rec, clamped, callback, step)

    while T - state.t_curr > 1e-12 * max(1.0, abs(T)):
        if max_steps is not None and step >= max_steps:
            result.truncated = True
            log.info("step budget of %d exhausted at t=%.6g", max_steps, state.t_curr)
            break
        k_prop = source.next(rec.k, rec.__dict__)
        k, clamped = clamp(k_prop, state.t_curr)
        (new_state, coeffs, info), k = attempt(
            lambda kk: dln_step(problem, state, kk, theta, cfg, newton=newton), k, state.t_curr)
        step += 1
        if clamped:
            new_state = FieldState(new_state.t_prev, T, new_state.prev, new_state.curr)
        rec = _record(problem, state.prev, state.curr, new_state.curr, coeffs, theta, step,
                      new_state.t_curr, k, info.iterations)
        state = new_state
        _accept(result, monitor, disc, state, rec, clamped, callback, step)

    result.state = state
    result.energy_violations = monitor.violations
    result.factorizations = newton.total_factorizations
    return result


def _accept(result, monitor, disc, state, rec, clamped, callback, step):
    monitor.add(rec)
    bu, bw = disc.divergence_norms(state.curr)
    result.divergence.append((step, bu, bw))
    if clamped:
        result.clamped_steps.append(step)
    if callback:
        callback(step, state, rec)
    if step % 100 == 0:
        log.info("step %d t=%.6g k=%.3e E=%.10e newton=%d", step, rec.t, rec.k, rec.E, rec.newton_iters)


def run_constant(problem: Problem, state: FieldState, k: float, T: float, theta: float = 0.3,
                 cfg: SolverConfig | None = None, **kw) -> RunResult:
    cfg = cfg or SolverConfig(reuse_jacobian=True)
    return march(problem, state, theta, T, ConstantSteps(k), cfg, **kw)


def run_adaptive(problem: Problem, state: FieldState, ctrl: ControllerConfig, T: float, theta: float = 0.3,
                 cfg: SolverConfig | None = None, **kw) -> RunResult:
    cfg = cfg or SolverConfig(reuse_jacobian=True)
    return march(problem, state, theta, T, Controller(ctrl), cfg, retry=ctrl, **kw)
